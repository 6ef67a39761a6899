//! Fully connected multi-output network with logistic units everywhere.
//!
//! Output `t` is the survival probability for time unit `t + 1`. The network is
//! trained with sigmoid cross-entropy against soft curve targets using plain
//! mini-batch gradient descent, and its raw outputs are post-processed into a
//! non-increasing curve by a running minimum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::survival::SurvivalCurve;

/// Consecutive epochs without at least this much loss improvement count toward early stopping.
pub const EARLY_STOP_MIN_DELTA: f64 = 1e-6;
pub const EARLY_STOP_PATIENCE: usize = 25;

const CHECKPOINT_FORMAT: &str = "geosurv-network";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("empty batch")]
    EmptyBatch,
    #[error("target values must lie in [0, 1]")]
    InvalidTarget,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub output_dim: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_fraction: f64,
    pub seed: u64,
}

impl NetworkConfig {
    /// Config with learning rate 0.1, 2500 epochs, 10% batches and seed 0.
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_sizes,
            output_dim,
            learning_rate: 0.1,
            max_epochs: 2500,
            batch_fraction: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.is_empty() {
            return Err(ModelError::InvalidConfig("at least one hidden layer required".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_sizes.contains(&0) {
            return Err(ModelError::InvalidConfig("zero-size layer".into()));
        }
        self.training_options().validate()
    }

    pub fn training_options(&self) -> TrainOptions {
        TrainOptions {
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            batch_fraction: self.batch_fraction,
            seed: self.seed,
        }
    }

    fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(&self.hidden_sizes);
        sizes.push(self.output_dim);
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_fraction: f64,
    pub seed: u64,
}

impl TrainOptions {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig("learning rate must be positive".into()));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(ModelError::InvalidConfig("batch fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Affine map `out x in` followed by the logistic function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    weights: Matrix,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(ModelError::DimensionMismatch {
                expected: weights.rows(),
                got: bias.len(),
            });
        }
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(ModelError::InvalidConfig("zero-size layer".into()));
        }
        if !weights.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(ModelError::InvalidConfig("non-finite parameter".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    fn pre_activation(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = self.weights.as_slice();
        let n_in = self.inputs();
        for (o, b) in self.bias.iter().enumerate() {
            let row = &w[o * n_in..(o + 1) * n_in];
            out.push(b + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Same shape as a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.outputs(), l.inputs()))
                .collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.outputs()]).collect(),
        }
    }

    fn reset(&mut self) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|x| *x = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.as_mut_slice().iter_mut().for_each(|x| *x *= factor);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Flattened in layer order, weights (row-major) before biases per layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Output of the final logistic layer, before smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawOutput(Vec<f64>);

impl RawOutput {
    /// Accepts values in `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Option<Self> {
        values
            .iter()
            .all(|x| (0.0..=1.0).contains(x))
            .then_some(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl Network {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(ModelError::InvalidConfig("no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(ModelError::DimensionMismatch {
                    expected: pair[0].outputs(),
                    got: pair[1].inputs(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum()
    }

    /// Flattened parameters in [`Gradients::flatten`] order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Overwrites parameters from a [`Network::parameters`]-ordered slice.
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(ModelError::DimensionMismatch {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let (rows, cols) = (l.outputs(), l.inputs());
            l.weights = Matrix::from_fn(rows, cols, |i, j| params[at + i * cols + j]);
            at += rows * cols;
            l.bias.copy_from_slice(&params[at..at + rows]);
            at += rows;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteInput);
        }
        Ok(())
    }

    /// Pre-activations of the output layer.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut act = x.to_vec();
        let mut z = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.pre_activation(&act, &mut z);
            if i + 1 < self.layers.len() {
                act = z.iter().map(|&v| logistic(v)).collect();
            }
        }
        Ok(z)
    }

    /// Serializes config-free parameters to a versioned JSON checkpoint.
    pub fn to_checkpoint(&self) -> String {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            network: self.clone(),
        };
        serde_json::to_string(&ck).expect("network serialization cannot fail")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let layers = ck
            .network
            .layers
            .into_iter()
            .map(|l| Layer::new(l.weights, l.bias))
            .collect::<Result<Vec<_>>>()?;
        Network::from_layers(layers)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    network: Network,
}

/// Network with uniform `[-r, r]` weights, `r = sqrt(6 / (fan_in + fan_out))`, and zero biases.
pub fn init_network(config: &NetworkConfig) -> Result<Network> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sizes = config.layer_sizes();
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Matrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-r..=r));
            Layer {
                weights,
                bias: vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(Network { layers })
}

pub fn forward(net: &Network, x: &[f64]) -> Result<RawOutput> {
    Ok(RawOutput(net.logits(x)?.into_iter().map(logistic).collect()))
}

/// Sigmoid cross-entropy of logits against soft targets, summed over outputs.
pub fn loss_from_logits(logits: &[f64], target: &[f64]) -> Result<f64> {
    if logits.len() != target.len() {
        return Err(ModelError::DimensionMismatch {
            expected: logits.len(),
            got: target.len(),
        });
    }
    Ok(logits.iter().zip(target).map(|(&z, &y)| stable_bce(z, y)).sum())
}

/// `-(y log s(z) + (1 - y) log(1 - s(z)))` without overflow.
fn stable_bce(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Batch-mean loss of `net` on `(x, y)` pairs.
pub fn batch_loss(net: &Network, batch: &[(Vec<f64>, SurvivalCurve)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut total = 0.0;
    for (x, y) in batch {
        total += loss_from_logits(&net.logits(x)?, y.values())?;
    }
    Ok(total / batch.len() as f64)
}

/// Per-sample forward/backward scratch space.
struct Scratch {
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    z: Vec<f64>,
}

impl Scratch {
    fn new(net: &Network) -> Self {
        let mut activations = vec![Vec::with_capacity(net.input_dim())];
        activations.extend(net.layers.iter().map(|l| Vec::with_capacity(l.outputs())));
        Self {
            activations,
            deltas: net.layers.iter().map(|l| vec![0.0; l.outputs()]).collect(),
            z: Vec::new(),
        }
    }
}

/// Adds one sample's loss gradient into `grads` and returns its loss.
fn accumulate(net: &Network, x: &[f64], y: &[f64], grads: &mut Gradients, s: &mut Scratch) -> f64 {
    let n_layers = net.layers.len();
    s.activations[0].clear();
    s.activations[0].extend_from_slice(x);
    let mut loss = 0.0;
    for (i, layer) in net.layers.iter().enumerate() {
        let (before, after) = s.activations.split_at_mut(i + 1);
        layer.pre_activation(&before[i], &mut s.z);
        let out = &mut after[0];
        out.clear();
        out.extend(s.z.iter().map(|&v| logistic(v)));
        if i + 1 == n_layers {
            for (t, (&z, &target)) in s.z.iter().zip(y).enumerate() {
                loss += stable_bce(z, target);
                s.deltas[i][t] = out[t] - target;
            }
        }
    }
    for i in (0..n_layers).rev() {
        if i + 1 < n_layers {
            let next = &net.layers[i + 1];
            let n_in = next.inputs();
            let w = next.weights.as_slice();
            let (cur, rest) = s.deltas.split_at_mut(i + 1);
            let cur = &mut cur[i];
            cur.iter_mut().for_each(|d| *d = 0.0);
            for (o, &d) in rest[0].iter().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                for (c, &wv) in cur.iter_mut().zip(row) {
                    *c += wv * d;
                }
            }
            for (c, &a) in cur.iter_mut().zip(&s.activations[i + 1]) {
                *c *= a * (1.0 - a);
            }
        }
        let input = &s.activations[i];
        let n_in = input.len();
        let gw = &mut grads.weights[i];
        for (o, &d) in s.deltas[i].iter().enumerate() {
            grads.biases[i][o] += d;
            for (j, &a) in input.iter().enumerate() {
                gw[(o, j)] += d * a;
            }
        }
        debug_assert_eq!(n_in, net.layers[i].inputs());
    }
    loss
}

fn check_sample(net: &Network, x: &[f64], y: &[f64]) -> Result<()> {
    net.check_input(x)?;
    if y.len() != net.output_dim() {
        return Err(ModelError::DimensionMismatch {
            expected: net.output_dim(),
            got: y.len(),
        });
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(ModelError::InvalidTarget);
    }
    Ok(())
}

/// Exact gradient of the batch-mean loss with respect to every parameter.
pub fn gradient(net: &Network, batch: &[(Vec<f64>, SurvivalCurve)]) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut grads = Gradients::zeros_like(net);
    let mut scratch = Scratch::new(net);
    for (x, y) in batch {
        check_sample(net, x, y.values())?;
        accumulate(net, x, y.values(), &mut grads, &mut scratch);
    }
    grads.scale(1.0 / batch.len() as f64);
    Ok(grads)
}

fn apply(net: &mut Network, grads: &Gradients, step: f64) {
    for ((layer, gw), gb) in net.layers.iter_mut().zip(&grads.weights).zip(&grads.biases) {
        let (rows, cols) = (layer.outputs(), layer.inputs());
        for i in 0..rows {
            for j in 0..cols {
                layer.weights[(i, j)] -= step * gw[(i, j)];
            }
            layer.bias[i] -= step * gb[i];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub epochs_run: usize,
    /// Mean per-sample loss of each completed epoch, measured before each batch's update.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch gradient descent from an existing network.
///
/// Samples are reshuffled each epoch; batches hold `ceil(batch_fraction * n)` samples.
/// Stops after `max_epochs`, or once the epoch-mean loss has failed to improve on its
/// best value by [`EARLY_STOP_MIN_DELTA`] for [`EARLY_STOP_PATIENCE`] consecutive epochs.
pub fn fit(
    net: &mut Network,
    data: &[(Vec<f64>, SurvivalCurve)],
    options: &TrainOptions,
) -> Result<TrainSummary> {
    fit_observed(net, data, options, |_, _| {})
}

/// [`fit`], calling `after_epoch(epochs_completed, net)` at the end of every epoch.
pub fn fit_observed(
    net: &mut Network,
    data: &[(Vec<f64>, SurvivalCurve)],
    options: &TrainOptions,
    mut after_epoch: impl FnMut(usize, &Network),
) -> Result<TrainSummary> {
    options.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    for (x, y) in data {
        check_sample(net, x, y.values())?;
    }
    let n = data.len();
    let batch_size = ((options.batch_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = Gradients::zeros_like(net);
    let mut scratch = Scratch::new(net);
    let mut summary = TrainSummary {
        epochs_run: 0,
        epoch_losses: Vec::new(),
    };
    let mut best = f64::INFINITY;
    let mut stalled = 0;

    for _ in 0..options.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            grads.reset();
            for &i in chunk {
                let (x, y) = &data[i];
                epoch_loss += accumulate(net, x, y.values(), &mut grads, &mut scratch);
            }
            apply(net, &grads, options.learning_rate / chunk.len() as f64);
        }
        epoch_loss /= n as f64;
        summary.epochs_run += 1;
        summary.epoch_losses.push(epoch_loss);
        after_epoch(summary.epochs_run, net);

        if best - epoch_loss < EARLY_STOP_MIN_DELTA {
            stalled += 1;
            if stalled >= EARLY_STOP_PATIENCE {
                break;
            }
        } else {
            stalled = 0;
        }
        best = best.min(epoch_loss);
    }
    Ok(summary)
}

/// Initializes from `config` and trains on `data`.
pub fn train(config: &NetworkConfig, data: &[(Vec<f64>, SurvivalCurve)]) -> Result<Network> {
    train_with_summary(config, data).map(|(net, _)| net)
}

pub fn train_with_summary(
    config: &NetworkConfig,
    data: &[(Vec<f64>, SurvivalCurve)],
) -> Result<(Network, TrainSummary)> {
    let mut net = init_network(config)?;
    if data.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let summary = fit(&mut net, data, &config.training_options())?;
    Ok((net, summary))
}

/// Running minimum, making the curve non-increasing.
pub fn smooth(raw: &RawOutput) -> SurvivalCurve {
    let mut prev = f64::INFINITY;
    let values = raw
        .0
        .iter()
        .map(|&x| {
            prev = prev.min(x);
            prev
        })
        .collect();
    SurvivalCurve::new_unchecked(values)
}

pub fn predict(net: &Network, x: &[f64]) -> Result<SurvivalCurve> {
    Ok(smooth(&forward(net, x)?))
}
