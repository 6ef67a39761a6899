//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "patients": "patients.csv",
//!   "map": "map.json",
//!   "design": "design.csv",
//!   "horizon": 20,
//!   "variants": [{"variant": "no_geo"}, {"variant": "rr_sa", "k": 5}],
//!   "folds": 10,
//!   "grid": {"hidden_sizes": [[16]], "epochs": [1000], "batch_fractions": [0.1]},
//!   "seed": 1,
//!   "output_dir": "out"
//! }
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geo::OutsidePolicy;

use super::{read_file, PipelineError, Result, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl VariantSpec {
    pub fn new(variant: Variant, k: Option<usize>) -> Self {
        Self { variant, k }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.variant.is_spectral(), self.k) {
            (true, None) => Err(PipelineError::Config(format!("variant {} requires k", self.variant))),
            (true, Some(0)) => Err(PipelineError::Config("k must be positive".into())),
            (false, Some(_)) => Err(PipelineError::Config(format!(
                "variant {} does not take k",
                self.variant
            ))),
            _ => Ok(()),
        }
    }

    /// `rr_sa_k5` for spectral variants, the bare variant name otherwise.
    pub fn label(&self) -> String {
        match self.k {
            Some(k) if self.variant.is_spectral() => format!("{}_k{k}", self.variant),
            _ => self.variant.to_string(),
        }
    }
}

/// Candidate architectures and training budgets; every combination is trained per fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkGrid {
    #[serde(default = "default_hidden")]
    pub hidden_sizes: Vec<Vec<usize>>,
    #[serde(default = "default_epochs")]
    pub epochs: Vec<usize>,
    #[serde(default = "default_batch_fractions")]
    pub batch_fractions: Vec<f64>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
}

fn default_hidden() -> Vec<Vec<usize>> {
    vec![vec![32], vec![32, 16]]
}

fn default_epochs() -> Vec<usize> {
    vec![1000, 1500, 2000, 2500]
}

fn default_batch_fractions() -> Vec<f64> {
    vec![0.1]
}

fn default_learning_rate() -> f64 {
    0.1
}

fn default_folds() -> usize {
    10
}

impl Default for NetworkGrid {
    fn default() -> Self {
        Self {
            hidden_sizes: default_hidden(),
            epochs: default_epochs(),
            batch_fractions: default_batch_fractions(),
            learning_rate: default_learning_rate(),
        }
    }
}

impl NetworkGrid {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.hidden_sizes.is_empty() || self.epochs.is_empty() || self.batch_fractions.is_empty() {
            return err("network grid lists must be non-empty");
        }
        if self.hidden_sizes.iter().any(|h| h.is_empty() || h.contains(&0)) {
            return err("every architecture needs at least one non-empty hidden layer");
        }
        if self.batch_fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return err("batch fractions must lie in (0, 1]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return err("learning rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub patients: PathBuf,
    pub map: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    /// Number of discrete time units `T`.
    pub horizon: usize,
    pub variants: Vec<VariantSpec>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub grid: NetworkGrid,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub outside_policy: OutsidePolicy,
    /// Also write k-means cluster labels for each spectral variant.
    #[serde(default)]
    pub export_clusters: bool,
    /// When set, every fold's selected network is written here as a checkpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a config file and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.patients);
        resolve(&mut config.map);
        resolve(&mut config.output_dir);
        if let Some(d) = config.design.as_mut() {
            resolve(d);
        }
        if let Some(d) = config.checkpoint_dir.as_mut() {
            resolve(d);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(PipelineError::Config("folds must be at least 2".into()));
        }
        if self.horizon == 0 {
            return Err(PipelineError::Config("horizon must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(PipelineError::Config("no variants requested".into()));
        }
        for v in &self.variants {
            v.validate()?;
            if v.variant.needs_design() && self.design.is_none() {
                return Err(PipelineError::Config(format!(
                    "variant {} needs a design matrix",
                    v.variant
                )));
            }
        }
        let mut labels: Vec<String> = self.variants.iter().map(VariantSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(PipelineError::Config("duplicate variant entries".into()));
        }
        self.grid.validate()
    }
}
