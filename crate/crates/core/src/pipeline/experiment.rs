//! K-fold cross-validated evaluation of a geographic representation.
//!
//! Per fold, the population survival estimate is fit on the training part only
//! and used to re-represent both training targets and held-out actuals. All
//! held-out predictions are pooled across folds; the report compares the mean
//! predicted curve with the mean actual curve by area between curves.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geo::{self, DesignMatrix, GeoMap};
use crate::model::{self, Network, NetworkConfig};
use crate::spectral::{self, SpectralEmbedding};
use crate::survival::{self, EventRecord, SurvivalCurve};

use super::config::{ExperimentConfig, NetworkGrid, VariantSpec};
use super::dataset::PatientDataset;
use super::features::{build_features, GeoArtifacts};
use super::output::{write_atomic, ClusterExport};
use super::{derive_seed, read_file, PipelineError, Result};

const FOLD_STREAM: u64 = 0xF01D;
const CLUSTER_STREAM: u64 = 0xC1A5;

/// Architecture and budget picked for one fold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelChoice {
    pub hidden_sizes: Vec<usize>,
    pub epochs: usize,
    pub batch_fraction: f64,
    pub epochs_run: usize,
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldInfo {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub choice: Option<ModelChoice>,
    #[serde(skip)]
    pub checkpoint: Option<String>,
}

pub trait CurvePredictor {
    fn predict(&self, x: &[f64]) -> Result<SurvivalCurve>;

    fn choice(&self) -> Option<ModelChoice> {
        None
    }

    fn checkpoint(&self) -> Option<String> {
        None
    }
}

/// Fits a curve predictor on one training fold.
pub trait CurveLearner {
    fn fit(&self, train: &[(Vec<f64>, SurvivalCurve)], seed: u64) -> Result<Box<dyn CurvePredictor>>;
}

/// Trains every grid candidate and keeps the one with the lowest final training loss.
#[derive(Debug, Clone)]
pub struct NetworkLearner {
    pub grid: NetworkGrid,
}

struct NetworkPredictor {
    net: Network,
    choice: ModelChoice,
}

impl CurvePredictor for NetworkPredictor {
    fn predict(&self, x: &[f64]) -> Result<SurvivalCurve> {
        Ok(model::predict(&self.net, x)?)
    }

    fn choice(&self) -> Option<ModelChoice> {
        Some(self.choice.clone())
    }

    fn checkpoint(&self) -> Option<String> {
        Some(self.net.to_checkpoint())
    }
}

impl CurveLearner for NetworkLearner {
    fn fit(&self, train: &[(Vec<f64>, SurvivalCurve)], seed: u64) -> Result<Box<dyn CurvePredictor>> {
        self.grid.validate()?;
        let (x0, y0) = train.first().ok_or(model::ModelError::EmptyBatch)?;
        let mut budgets = self.grid.epochs.clone();
        budgets.sort_unstable();
        budgets.dedup();
        let max_epochs = *budgets.last().expect("validated non-empty");

        let mut best: Option<(Network, ModelChoice)> = None;
        for (hi, hidden) in self.grid.hidden_sizes.iter().enumerate() {
            for (bi, &batch_fraction) in self.grid.batch_fractions.iter().enumerate() {
                let config = NetworkConfig {
                    input_dim: x0.len(),
                    hidden_sizes: hidden.clone(),
                    output_dim: y0.len(),
                    learning_rate: self.grid.learning_rate,
                    max_epochs,
                    batch_fraction,
                    seed: derive_seed(seed, &[hi as u64, bi as u64]),
                };
                // One run serves every budget: a shorter run is a prefix of a longer one.
                let mut net = model::init_network(&config)?;
                let mut snapshots: Vec<(usize, Network)> = Vec::new();
                let summary = model::fit_observed(&mut net, train, &config.training_options(), |epoch, n| {
                    if budgets.binary_search(&epoch).is_ok() && epoch < max_epochs {
                        snapshots.push((epoch, n.clone()));
                    }
                })?;
                for &budget in &budgets {
                    let candidate = match snapshots.iter().find(|(e, _)| *e == budget) {
                        Some((_, n)) => n,
                        None => &net,
                    };
                    let loss = model::batch_loss(candidate, train)?;
                    if best.as_ref().map_or(true, |(_, c)| loss < c.train_loss) {
                        best = Some((
                            candidate.clone(),
                            ModelChoice {
                                hidden_sizes: hidden.clone(),
                                epochs: budget,
                                batch_fraction,
                                epochs_run: summary.epochs_run.min(budget),
                                train_loss: loss,
                            },
                        ));
                    }
                }
            }
        }
        let (net, choice) = best.expect("grid is non-empty");
        Ok(Box::new(NetworkPredictor { net, choice }))
    }
}

/// Fold index per instance: a seeded shuffle dealt round-robin, so sizes differ by at most one.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &[FOLD_STREAM])));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvOutcome {
    pub actual_mean: SurvivalCurve,
    pub predicted_mean: SurvivalCurve,
    pub abc: f64,
    /// Mean over instances of the ABC between each held-out prediction and its actual curve.
    pub mean_instance_abc: f64,
    pub folds: Vec<FoldInfo>,
}

/// Cross-validates `learner` on fixed per-instance feature vectors.
pub fn cross_validate(
    features: &[Vec<f64>],
    records: &[EventRecord],
    horizon: usize,
    folds: usize,
    seed: u64,
    learner: &dyn CurveLearner,
    label: &str,
) -> Result<CvOutcome> {
    let n = records.len();
    if features.len() != n {
        return Err(PipelineError::Dataset(format!(
            "{} feature rows for {n} records",
            features.len()
        )));
    }
    if folds < 2 || n < folds {
        return Err(PipelineError::Config(format!(
            "cannot split {n} instances into {folds} folds"
        )));
    }
    let assignment = assign_folds(n, folds, seed);
    let mut actuals = Vec::with_capacity(n);
    let mut predictions = Vec::with_capacity(n);
    let mut infos = Vec::with_capacity(folds);

    for fold in 0..folds {
        let wrap = |e: PipelineError| PipelineError::Fold {
            variant: label.to_string(),
            fold,
            source: Box::new(e),
        };
        let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == fold);
        let train_records: Vec<EventRecord> = train.iter().map(|&i| records[i]).collect();
        let population = survival::km_estimator(&train_records, horizon).map_err(|e| wrap(e.into()))?;
        let train_data = train
            .iter()
            .map(|&i| Ok((features[i].clone(), survival::rerepresent(&records[i], &population)?)))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        let predictor = learner
            .fit(&train_data, derive_seed(seed, &[FOLD_STREAM, fold as u64]))
            .map_err(wrap)?;
        for &i in &test {
            let actual = survival::rerepresent(&records[i], &population).map_err(|e| wrap(e.into()))?;
            let predicted = predictor.predict(&features[i]).map_err(wrap)?;
            if predicted.len() != horizon {
                return Err(wrap(PipelineError::Dataset(format!(
                    "predicted curve has {} points, horizon is {horizon}",
                    predicted.len()
                ))));
            }
            actuals.push(actual);
            predictions.push(predicted);
        }
        infos.push(FoldInfo {
            fold,
            train_size: train.len(),
            test_size: test.len(),
            choice: predictor.choice(),
            checkpoint: predictor.checkpoint(),
        });
    }

    let actual_mean = survival::mean_curve(&actuals)?;
    let predicted_mean = survival::mean_curve(&predictions)?;
    let abc = survival::abc(&actual_mean, &predicted_mean)?;
    let mut instance_total = 0.0;
    for (a, p) in actuals.iter().zip(&predictions) {
        instance_total += survival::abc(a, p)?;
    }
    Ok(CvOutcome {
        actual_mean,
        predicted_mean,
        abc,
        mean_instance_abc: instance_total / n as f64,
        folds: infos,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantReport {
    pub label: String,
    pub variant: super::Variant,
    pub k: Option<usize>,
    pub abc: f64,
    pub mean_instance_abc: f64,
    pub feature_dim: usize,
    pub folds: Vec<FoldInfo>,
    pub actual_mean: SurvivalCurve,
    pub predicted_mean: SurvivalCurve,
    #[serde(skip)]
    pub clusters: Option<ClusterExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbcReport {
    pub horizon: usize,
    pub folds: usize,
    pub seed: u64,
    pub variants: Vec<VariantReport>,
}

impl AbcReport {
    pub fn clusters(&self) -> Vec<ClusterExport> {
        self.variants.iter().filter_map(|v| v.clusters.clone()).collect()
    }
}

/// Parsed experiment inputs.
#[derive(Debug, Clone)]
pub struct ExperimentInputs {
    pub dataset: PatientDataset,
    pub map: GeoMap,
    pub design: Option<DesignMatrix>,
}

pub fn load_inputs(config: &ExperimentConfig) -> Result<ExperimentInputs> {
    let map = geo::parse_map(&read_file(&config.map)?)?;
    if map.is_empty() {
        return Err(geo::GeoError::EmptyMap.into());
    }
    let design = match &config.design {
        Some(path) => Some(geo::load_design_matrix(&read_file(path)?, &map)?),
        None => None,
    };
    let dataset = PatientDataset::from_csv(&read_file(&config.patients)?, config.horizon)?;
    Ok(ExperimentInputs { dataset, map, design })
}

fn embedding_for(spec: &VariantSpec, inputs: &ExperimentInputs) -> Result<Option<SpectralEmbedding>> {
    let Some(k) = spec.k.filter(|_| spec.variant.is_spectral()) else {
        return Ok(None);
    };
    let embedding = match spec.variant.ssa_rep() {
        None => spectral::rr_sa_embedding(&inputs.map, k)?,
        Some(rep) => {
            let design = inputs.design.as_ref().ok_or_else(|| {
                PipelineError::Config(format!("variant {} needs a design matrix", spec.variant))
            })?;
            spectral::rr_ssa_embedding(&inputs.map, design, rep, k)?
        }
    };
    Ok(Some(embedding))
}

/// Cross-validates one variant with the given learner.
pub fn run_variant(
    inputs: &ExperimentInputs,
    spec: &VariantSpec,
    config: &ExperimentConfig,
    learner: &dyn CurveLearner,
) -> Result<VariantReport> {
    spec.validate()?;
    let label = spec.label();
    let embedding = embedding_for(spec, inputs)?;
    let artifacts = GeoArtifacts {
        map: &inputs.map,
        embedding: embedding.as_ref(),
        policy: config.outside_policy,
    };
    let features = inputs
        .dataset
        .rows()
        .iter()
        .map(|row| build_features(row, spec.variant, &artifacts))
        .collect::<Result<Vec<_>>>()?;
    let records = inputs.dataset.records();
    let outcome = cross_validate(
        &features,
        &records,
        inputs.dataset.horizon(),
        config.folds,
        config.seed,
        learner,
        &label,
    )?;

    let clusters = match (&embedding, config.export_clusters) {
        (Some(e), true) => Some(ClusterExport {
            variant: spec.variant,
            labels: spectral::kmeans(e, e.k(), derive_seed(config.seed, &[CLUSTER_STREAM]))?,
            keys: inputs.map.keys().map(str::to_string).collect(),
        }),
        _ => None,
    };
    Ok(VariantReport {
        label,
        variant: spec.variant,
        k: spec.k,
        abc: outcome.abc,
        mean_instance_abc: outcome.mean_instance_abc,
        feature_dim: features.first().map_or(0, Vec::len),
        folds: outcome.folds,
        actual_mean: outcome.actual_mean,
        predicted_mean: outcome.predicted_mean,
        clusters,
    })
}

/// Loads inputs and cross-validates every configured variant with the network learner.
///
/// When `checkpoint_dir` is set, each fold's selected network is written there as
/// `model_<label>_fold<i>.json`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AbcReport> {
    config.validate()?;
    let inputs = load_inputs(config)?;
    let learner = NetworkLearner {
        grid: config.grid.clone(),
    };
    let mut variants = Vec::with_capacity(config.variants.len());
    for spec in &config.variants {
        let report = run_variant(&inputs, spec, config, &learner)?;
        if let Some(dir) = &config.checkpoint_dir {
            for fold in &report.folds {
                if let Some(ck) = &fold.checkpoint {
                    let path = dir.join(format!("model_{}_fold{}.json", report.label, fold.fold));
                    write_atomic(&path, ck)?;
                }
            }
        }
        variants.push(report);
    }
    Ok(AbcReport {
        horizon: config.horizon,
        folds: config.folds,
        seed: config.seed,
        variants,
    })
}
