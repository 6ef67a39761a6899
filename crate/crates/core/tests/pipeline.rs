mod common;

use std::cell::RefCell;
use std::collections::HashMap;
use std::fs;
use std::rc::Rc;

use geosurv::geo::{self, GeoPoint, OutsidePolicy};
use geosurv::pipeline::{
    build_features, cross_validate, emit_outputs, generate_synthetic, read_curves_csv, run_experiment, run_variant,
    AbcReport, CurveLearner, CurvePredictor, ExperimentConfig, ExperimentInputs, GeoArtifacts, NetworkGrid,
    PatientRow, PipelineError, SyntheticSpec, Variant, VariantSpec,
};
use geosurv::spectral;
use geosurv::survival::{EventRecord, SurvivalCurve};

/// Predicts each instance's true step curve, looked up by an id feature.
struct LookupLearner {
    table: HashMap<u64, SurvivalCurve>,
}

struct LookupPredictor {
    table: HashMap<u64, SurvivalCurve>,
}

impl CurvePredictor for LookupPredictor {
    fn predict(&self, x: &[f64]) -> Result<SurvivalCurve, PipelineError> {
        Ok(self.table[&(x[0] as u64)].clone())
    }
}

impl CurveLearner for LookupLearner {
    fn fit(&self, _: &[(Vec<f64>, SurvivalCurve)], _: u64) -> Result<Box<dyn CurvePredictor>, PipelineError> {
        Ok(Box::new(LookupPredictor {
            table: self.table.clone(),
        }))
    }
}

fn step_curve(t: usize, horizon: usize) -> SurvivalCurve {
    SurvivalCurve::new((1..=horizon).map(|u| if u < t { 1.0 } else { 0.0 }).collect()).unwrap()
}

#[test]
fn oracle_predictor_has_zero_abc() {
    let horizon = 6;
    let records: Vec<EventRecord> = (0..30)
        .map(|i| EventRecord::new(true, 1 + i % horizon, horizon).unwrap())
        .collect();
    let features: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
    let table = records
        .iter()
        .enumerate()
        .map(|(i, r)| (i as u64, step_curve(r.time(), horizon)))
        .collect();
    let out = cross_validate(&features, &records, horizon, 5, 3, &LookupLearner { table }, "oracle").unwrap();
    assert_eq!(out.actual_mean, out.predicted_mean);
    assert_eq!(out.abc, 0.0);
    assert_eq!(out.mean_instance_abc, 0.0);
    assert_eq!(out.folds.iter().map(|f| f.test_size).sum::<usize>(), 30);
}

/// Records the training targets it is given per call, predicts a flat half curve.
struct RecordingLearner {
    seen: Rc<RefCell<Vec<Vec<(Vec<f64>, SurvivalCurve)>>>>,
    horizon: usize,
}

struct Flat(usize);

impl CurvePredictor for Flat {
    fn predict(&self, _: &[f64]) -> Result<SurvivalCurve, PipelineError> {
        Ok(SurvivalCurve::new(vec![0.5; self.0]).unwrap())
    }
}

impl CurveLearner for RecordingLearner {
    fn fit(&self, train: &[(Vec<f64>, SurvivalCurve)], _: u64) -> Result<Box<dyn CurvePredictor>, PipelineError> {
        self.seen.borrow_mut().push(train.to_vec());
        Ok(Box::new(Flat(self.horizon)))
    }
}

#[test]
fn held_out_records_do_not_leak_into_training_targets() {
    let horizon = 5;
    let base: Vec<EventRecord> = (0..20)
        .map(|i| EventRecord::new(i % 3 != 0, 1 + (i * 7) % horizon, horizon).unwrap())
        .collect();
    let features: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
    let folds = 4;
    let seed = 9;
    let assignment = geosurv::pipeline::assign_folds(20, folds, seed);

    let run = |records: &[EventRecord]| {
        let seen = Rc::new(RefCell::new(Vec::new()));
        let learner = RecordingLearner {
            seen: Rc::clone(&seen),
            horizon,
        };
        cross_validate(&features, records, horizon, folds, seed, &learner, "leak").unwrap();
        seen.take()
    };
    let before = run(&base);
    // flip every fold-0 record to an early death; fold 0's training targets must not move
    let mut altered = base.clone();
    for (i, r) in altered.iter_mut().enumerate() {
        if assignment[i] == 0 {
            *r = EventRecord::new(true, 1, horizon).unwrap();
        }
    }
    let after = run(&altered);
    assert_eq!(before[0], after[0]);
    assert_ne!(before[1], after[1]);
}

fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        rows: 3,
        cols: 3,
        patients: 120,
        horizon: 6,
        base_hazard: 0.2,
        geo_amplitude: 1.5,
        censoring_rate: 0.3,
        seed,
        features: 3,
        nuisance_columns: 1,
    }
}

fn write_inputs(dir: &std::path::Path, spec: &SyntheticSpec) {
    let data = generate_synthetic(spec).unwrap();
    fs::write(dir.join("patients.csv"), data.dataset.to_csv()).unwrap();
    fs::write(dir.join("map.json"), data.map.to_json()).unwrap();
    fs::write(dir.join("design.csv"), data.design.to_csv(&data.map)).unwrap();
}

fn config(dir: &std::path::Path, variants: Vec<VariantSpec>) -> ExperimentConfig {
    ExperimentConfig {
        patients: dir.join("patients.csv"),
        map: dir.join("map.json"),
        design: Some(dir.join("design.csv")),
        horizon: 6,
        variants,
        folds: 3,
        grid: NetworkGrid {
            hidden_sizes: vec![vec![3]],
            epochs: vec![10, 25],
            batch_fractions: vec![0.2],
            learning_rate: 0.1,
        },
        seed: 4,
        output_dir: dir.join("out"),
        outside_policy: OutsidePolicy::Reject,
        export_clusters: true,
        checkpoint_dir: None,
    }
}

#[test]
fn experiment_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &small_spec(1));
    let cfg = config(
        dir.path(),
        vec![
            VariantSpec::new(Variant::NoGeo, None),
            VariantSpec::new(Variant::RrSsaBin, Some(2)),
        ],
    );
    let a: AbcReport = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    for v in &a.variants {
        assert!(v.abc >= 0.0);
        assert_eq!(v.actual_mean.len(), 6);
        assert_eq!(v.predicted_mean.len(), 6);
        assert_eq!(v.folds.len(), 3);
        assert!(v.folds.iter().all(|f| f.choice.is_some()));
    }
}

#[test]
fn emitted_file_counts() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &small_spec(2));
    let cfg = config(dir.path(), vec![VariantSpec::new(Variant::RrSa, Some(2))]);
    let report = run_experiment(&cfg).unwrap();

    let plain = dir.path().join("plain");
    let written = emit_outputs(&report, &[], &plain).unwrap();
    assert_eq!(written.len(), 2);
    assert_eq!(fs::read_dir(&plain).unwrap().count(), 2);

    let labelled = dir.path().join("labelled");
    let written = emit_outputs(&report, &report.clusters(), &labelled).unwrap();
    assert_eq!(written.len(), 3);
    assert!(labelled.join("clusters_rr_sa_2.csv").exists());
    assert!(labelled.join("curves_rr_sa_k2.csv").exists());
    assert_eq!(
        fs::read_to_string(labelled.join("abc_report.csv")).unwrap().lines().next(),
        Some("variant,k,abc")
    );
}

#[test]
fn rerun_overwrites_outputs_in_place() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &small_spec(3));
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("abc_report.csv"), "stale").unwrap();
    let cfg = config(dir.path(), vec![VariantSpec::new(Variant::Sbr, None)]);
    let report = run_experiment(&cfg).unwrap();
    emit_outputs(&report, &[], &out).unwrap();
    emit_outputs(&report, &[], &out).unwrap();
    let text = fs::read_to_string(out.join("abc_report.csv")).unwrap();
    assert!(text.starts_with("variant,k,abc\nsbr,,"));
    let names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2, "{names:?}");
    assert!(names.iter().all(|n| !n.ends_with(".tmp")));
}

#[test]
fn curves_round_trip_to_reported_abc() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), &small_spec(5));
    let cfg = config(
        dir.path(),
        vec![
            VariantSpec::new(Variant::NoGeo, None),
            VariantSpec::new(Variant::RrSsaFull, Some(3)),
        ],
    );
    let report = run_experiment(&cfg).unwrap();
    emit_outputs(&report, &[], &cfg.output_dir).unwrap();
    for v in &report.variants {
        let (a, p) = read_curves_csv(&cfg.output_dir.join(format!("curves_{}.csv", v.label))).unwrap();
        let abc: f64 = a.iter().zip(&p).map(|(x, y)| (x - y).abs()).sum();
        assert!((abc - v.abc).abs() <= 1e-9);
    }
}

#[test]
fn feature_lengths_follow_variant_accounting() {
    let spec = small_spec(6);
    let data = generate_synthetic(&spec).unwrap();
    let p = data.map.len();
    let m = spec.features;
    let embedding = spectral::rr_sa_embedding(&data.map, 4).unwrap();
    let with_embedding = GeoArtifacts {
        map: &data.map,
        embedding: Some(&embedding),
        policy: OutsidePolicy::Reject,
    };
    for (row, &cell) in data.dataset.rows().iter().zip(&data.patient_cells) {
        assert_eq!(build_features(row, Variant::NoGeo, &with_embedding).unwrap().len(), m);
        let sbr = build_features(row, Variant::Sbr, &with_embedding).unwrap();
        assert_eq!(sbr.len(), m + p);
        assert_eq!(sbr[m..].iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(sbr[m + cell], 1.0);
        let sa = build_features(row, Variant::RrSa, &with_embedding).unwrap();
        assert_eq!(sa.len(), m + 4);
        assert_eq!(&sa[m..], embedding.row(cell));
    }
}

#[test]
fn outside_points_fail_the_fold_or_fall_back() {
    let map = geo::grid_map(1, 2);
    let row = PatientRow {
        features: vec![1.0],
        coords: GeoPoint::new(5.0, 5.0).unwrap(),
        record: EventRecord::new(true, 1, 2).unwrap(),
    };
    let reject = GeoArtifacts {
        map: &map,
        embedding: None,
        policy: OutsidePolicy::Reject,
    };
    assert!(build_features(&row, Variant::Sbr, &reject).is_err());
    let nearest = GeoArtifacts {
        policy: OutsidePolicy::NearestCentroid,
        ..reject
    };
    assert_eq!(build_features(&row, Variant::Sbr, &nearest).unwrap(), vec![1.0, 0.0, 1.0]);
}

#[test]
fn missing_design_for_similarity_variant_is_reported() {
    let data = generate_synthetic(&small_spec(7)).unwrap();
    let inputs = ExperimentInputs {
        dataset: data.dataset,
        map: data.map,
        design: None,
    };
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), vec![]);
    cfg.design = None;
    let learner = geosurv::pipeline::NetworkLearner { grid: cfg.grid.clone() };
    let err = run_variant(&inputs, &VariantSpec::new(Variant::RrSsaFull, Some(2)), &cfg, &learner).unwrap_err();
    assert!(err.to_string().contains("design"), "{err}");
}
