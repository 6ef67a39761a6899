//! Experiment orchestration: datasets, feature assembly per geographic
//! representation, k-fold cross-validation and CSV reporting.

mod config;
mod dataset;
mod experiment;
mod features;
mod output;
mod synthetic;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoError;
use crate::model::ModelError;
use crate::spectral::{SpectralError, SsaRep};
use crate::survival::SurvivalError;

pub use config::{ExperimentConfig, NetworkGrid, VariantSpec};
pub use dataset::{PatientDataset, PatientRow};
pub use experiment::{
    assign_folds, cross_validate, load_inputs, run_experiment, run_variant, AbcReport, CurveLearner,
    CurvePredictor, CvOutcome, ExperimentInputs, FoldInfo, ModelChoice, NetworkLearner, VariantReport,
};
pub use features::{build_features, GeoArtifacts};
pub use output::{emit_outputs, read_curves_csv, write_atomic, ClusterExport};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("patient data: {0}")]
    Dataset(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Survival(#[from] SurvivalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("variant {variant}, fold {fold}: {source}")]
    Fold {
        variant: String,
        fold: usize,
        #[source]
        source: Box<PipelineError>,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Geographic representation appended to the non-geographic features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    NoGeo,
    Sbr,
    RrSa,
    RrSsaBin,
    RrSsaFull,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::NoGeo,
        Variant::Sbr,
        Variant::RrSa,
        Variant::RrSsaBin,
        Variant::RrSsaFull,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::NoGeo => "no_geo",
            Variant::Sbr => "sbr",
            Variant::RrSa => "rr_sa",
            Variant::RrSsaBin => "rr_ssa_bin",
            Variant::RrSsaFull => "rr_ssa_full",
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self, Variant::RrSa | Variant::RrSsaBin | Variant::RrSsaFull)
    }

    pub fn needs_design(&self) -> bool {
        self.ssa_rep().is_some()
    }

    pub fn ssa_rep(&self) -> Option<SsaRep> {
        match self {
            Variant::RrSsaBin => Some(SsaRep::Bin),
            Variant::RrSsaFull => Some(SsaRep::Full),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| PipelineError::Config(format!("unknown variant `{s}`")))
    }
}

/// Mixes `parts` into `base` (SplitMix64 finalizer per step).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}
