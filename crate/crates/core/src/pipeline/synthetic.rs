//! Seeded synthetic cohorts on a unit-square grid map.
//!
//! Each cell carries a smooth spatial risk `amplitude * (cos(pi u) + cos(pi v)) / 2`
//! in normalized cell-center coordinates `u, v`. A patient's per-unit hazard is
//! `logistic(logit(base_hazard) + beta . x + cell_risk)`, constant over time, so
//! event times are geometric. Censoring is independent: with probability
//! `censoring_rate` a patient gets a uniform censoring time in `1..T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geo::{grid_map, DesignMatrix, GeoMap, GeoPoint};
use crate::model::logistic;
use crate::survival::EventRecord;

use super::dataset::{PatientDataset, PatientRow};
use super::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub patients: usize,
    pub horizon: usize,
    /// Per-unit event probability of a baseline patient in a zero-risk cell.
    pub base_hazard: f64,
    /// Spatial risk amplitude on the logit scale.
    pub geo_amplitude: f64,
    pub censoring_rate: f64,
    pub seed: u64,
    /// Number of non-geographic patient features (alternating binary / uniform).
    #[serde(default = "default_features")]
    pub features: usize,
    /// Pure-noise columns appended to the design matrix.
    #[serde(default = "default_nuisance")]
    pub nuisance_columns: usize,
}

fn default_features() -> usize {
    4
}

fn default_nuisance() -> usize {
    2
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(PipelineError::Config(format!("synthetic spec: {m}")));
        if self.rows * self.cols < 2 {
            return err("grid needs at least 2 cells");
        }
        if self.patients == 0 || self.horizon == 0 {
            return err("patients and horizon must be positive");
        }
        if !(self.base_hazard > 0.0 && self.base_hazard < 1.0) {
            return err("base hazard must lie in (0, 1)");
        }
        if !self.geo_amplitude.is_finite() {
            return err("amplitude must be finite");
        }
        if !(0.0..=1.0).contains(&self.censoring_rate) {
            return err("censoring rate must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: PatientDataset,
    pub map: GeoMap,
    pub design: DesignMatrix,
    /// Logit-scale spatial risk per cell, in map order.
    pub cell_risk: Vec<f64>,
    /// Cell index (map order) of every patient.
    pub patient_cells: Vec<usize>,
}

/// Covariate effects on the logit hazard, cycled when more features are requested.
const BETA: [f64; 4] = [0.6, -0.5, 0.4, -0.3];

fn cell_risk(spec: &SyntheticSpec, r: usize, c: usize) -> f64 {
    let u = (r as f64 + 0.5) / spec.rows as f64;
    let v = (c as f64 + 0.5) / spec.cols as f64;
    let pi = std::f64::consts::PI;
    spec.geo_amplitude * ((pi * u).cos() + (pi * v).cos()) / 2.0
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let map = grid_map(spec.rows, spec.cols);
    let cells = spec.rows * spec.cols;
    let risk: Vec<f64> = (0..cells)
        .map(|i| cell_risk(spec, i / spec.cols, i % spec.cols))
        .collect();
    let base_logit = (spec.base_hazard / (1.0 - spec.base_hazard)).ln();
    let horizon = spec.horizon;

    let mut rows = Vec::with_capacity(spec.patients);
    let mut patient_cells = Vec::with_capacity(spec.patients);
    for _ in 0..spec.patients {
        let cell = rng.gen_range(0..cells);
        let (r, c) = ((cell / spec.cols) as f64, (cell % spec.cols) as f64);
        let coords = GeoPoint::new(r + rng.gen_range(0.01..0.99), c + rng.gen_range(0.01..0.99))?;
        let features: Vec<f64> = (0..spec.features)
            .map(|j| {
                if j % 2 == 0 {
                    f64::from(u8::from(rng.gen_bool(0.5)))
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let linear: f64 = features
            .iter()
            .enumerate()
            .map(|(j, x)| BETA[j % BETA.len()] * x)
            .sum();
        let hazard = logistic(base_logit + linear + risk[cell]);

        let event_time = (1..=horizon).find(|_| rng.gen::<f64>() < hazard);
        let censor_time = (rng.gen::<f64>() < spec.censoring_rate && horizon > 1)
            .then(|| rng.gen_range(1..horizon));
        let (event, time) = match (event_time, censor_time) {
            (Some(t), Some(c)) if c < t => (false, c),
            (Some(t), _) => (true, t),
            (None, Some(c)) => (false, c),
            (None, None) => (false, horizon),
        };
        rows.push(PatientRow {
            features,
            coords,
            record: EventRecord::new(event, time, horizon)?,
        });
        patient_cells.push(cell);
    }
    let names = (0..spec.features).map(|j| format!("f_{j}")).collect();
    let dataset = PatientDataset::new(names, rows, horizon)?;

    let noise = Normal::new(0.0, 0.25).expect("valid normal");
    let mut design_names = vec!["center_lat".to_string(), "center_lon".to_string(), "risk_proxy".to_string()];
    design_names.extend((1..=spec.nuisance_columns).map(|j| format!("nuisance_{j}")));
    let design_rows: Vec<Vec<f64>> = (0..cells)
        .map(|cell| {
            let (r, c) = (cell / spec.cols, cell % spec.cols);
            let mut row = vec![
                (r as f64 + 0.5) / spec.rows as f64,
                (c as f64 + 0.5) / spec.cols as f64,
                risk[cell] + noise.sample(&mut rng),
            ];
            row.extend((0..spec.nuisance_columns).map(|_| rng.gen::<f64>()));
            row
        })
        .collect();
    let design = DesignMatrix::new(design_names, &design_rows)?;

    Ok(SyntheticData {
        dataset,
        map,
        design,
        cell_risk: risk,
        patient_cells,
    })
}
