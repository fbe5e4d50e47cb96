//! Mini-batch training of the hybrid canceller.
//!
//! Two-step scheme: the linear canceller is identified first by least
//! squares on the raw training split, treating everything it cannot model as
//! noise; the network is then trained against the normalized residual with
//! mini-batch Adam under a mean-squared-error loss on the real and imaginary
//! output components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lincanc::{apply_linear, fit_linear, FitError};
use crate::metrics;
use crate::opcount::OpCounter;
use crate::sigmodel::Dataset;
use crate::Complex64;

use super::{layer_dims, NnModel, RealMat};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),
}

/// Optimizer and schedule settings. Defaults: batches of 32, Adam with a
/// learning rate of 0.004 and the usual moment constants, 50 epochs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 0.004,
            epochs: 50,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::BadConfig("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::BadConfig("epoch count must be >= 1".into()));
        }
        Ok(())
    }
}

/// One epoch of the training log. Losses are full-pass evaluations with
/// frozen weights at the epoch boundary, so re-evaluating a stored model
/// reproduces them exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub c_db_total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,test_mse,c_db_total\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_mse, e.test_mse, e.c_db_total));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NnModel,
    pub log: TrainLog,
}

/// Plain parameter container used during optimization.
#[derive(Debug, Clone)]
pub(crate) struct Net {
    pub weights: Vec<RealMat>,
    pub biases: Vec<Vec<f64>>,
}

impl Net {
    pub fn init(l: u32, n_l: u32, n_h: u32, rng: &mut ChaCha8Rng) -> Self {
        let dims = layer_dims(l, n_l, n_h);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut w = RealMat::zeros(fan_out, fan_in);
            for v in &mut w.data {
                *v = (rng.gen::<f64>() * 2.0 - 1.0) * bound;
            }
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Self { weights, biases }
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass caching pre-activations; hidden layers are ReLU, the
    /// output layer is linear.
    pub fn forward_cached(&self, input: &[f64], acts: &mut Vec<Vec<f64>>) -> [f64; 2] {
        acts.clear();
        acts.push(input.to_vec());
        for layer in 0..self.n_layers() {
            let w = &self.weights[layer];
            let prev = &acts[layer];
            let mut out = vec![0.0f64; w.rows];
            for (j, slot) in out.iter_mut().enumerate() {
                let mut acc = self.biases[layer][j];
                let row = &w.data[j * w.cols..(j + 1) * w.cols];
                for (wi, xi) in row.iter().zip(prev.iter()) {
                    acc += wi * xi;
                }
                *slot = if layer + 1 < self.n_layers() { acc.max(0.0) } else { acc };
            }
            acts.push(out);
        }
        let last = acts.last().expect("network has layers");
        [last[0], last[1]]
    }

    /// Accumulate the gradient of `(out - target)^2` (summed over the two
    /// output components) into `grads` for one sample. `acts` must come from
    /// [`Self::forward_cached`] on the same input.
    pub fn accumulate_gradient(&self, acts: &[Vec<f64>], target: [f64; 2], grads: &mut Grads) {
        let n_layers = self.n_layers();
        let out = &acts[n_layers];
        let mut delta = vec![2.0 * (out[0] - target[0]), 2.0 * (out[1] - target[1])];
        for layer in (0..n_layers).rev() {
            let w = &self.weights[layer];
            let prev = &acts[layer];
            for j in 0..w.rows {
                let d = delta[j];
                grads.biases[layer][j] += d;
                let grow = &mut grads.weights[layer].data[j * w.cols..(j + 1) * w.cols];
                for (g, xi) in grow.iter_mut().zip(prev.iter()) {
                    *g += d * xi;
                }
            }
            if layer > 0 {
                let mut prev_delta = vec![0.0f64; w.cols];
                for j in 0..w.rows {
                    let d = delta[j];
                    let row = &w.data[j * w.cols..(j + 1) * w.cols];
                    for (pd, wi) in prev_delta.iter_mut().zip(row.iter()) {
                        *pd += wi * d;
                    }
                }
                // ReLU derivative: the cached activation is already clamped.
                for (pd, a) in prev_delta.iter_mut().zip(acts[layer].iter()) {
                    if *a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev_delta;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Grads {
    pub weights: Vec<RealMat>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Net) -> Self {
        Self {
            weights: net.weights.iter().map(|w| RealMat::zeros(w.rows, w.cols)).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for w in &mut self.weights {
            w.data.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

struct Adam {
    m_w: Vec<RealMat>,
    v_w: Vec<RealMat>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    fn new(net: &Net) -> Self {
        Self {
            m_w: net.weights.iter().map(|w| RealMat::zeros(w.rows, w.cols)).collect(),
            v_w: net.weights.iter().map(|w| RealMat::zeros(w.rows, w.cols)).collect(),
            m_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            step: 0,
        }
    }

    fn update(&mut self, net: &mut Net, grads: &Grads, cfg: &TrainConfig, batch_len: usize) {
        self.step += 1;
        let scale = 1.0 / batch_len as f64;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for layer in 0..net.weights.len() {
            for (i, w) in net.weights[layer].data.iter_mut().enumerate() {
                let g = grads.weights[layer].data[i] * scale;
                let m = &mut self.m_w[layer].data[i];
                let v = &mut self.v_w[layer].data[i];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *w -= cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + cfg.epsilon);
            }
            for (i, b) in net.biases[layer].iter_mut().enumerate() {
                let g = grads.biases[layer][i] * scale;
                let m = &mut self.m_b[layer][i];
                let v = &mut self.v_b[layer][i];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *b -= cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Round the residual scale to the nearest power of two, the constraint that
/// turns denormalization into a hardware shift.
fn power_of_two_exponent(sigma: f64) -> i32 {
    if !(sigma > 0.0) {
        return -60;
    }
    sigma.log2().round().clamp(-60.0, 60.0) as i32
}

/// Mean squared error over normalized component targets: the sum of the mean
/// squared real error and the mean squared imaginary error.
fn mse_over(net: &Net, windows: &[Vec<f64>], targets: &[[f64; 2]]) -> f64 {
    let mut acc = 0.0;
    let mut acts = Vec::new();
    for (w, t) in windows.iter().zip(targets) {
        let out = net.forward_cached(w, &mut acts);
        acc += (out[0] - t[0]).powi(2) + (out[1] - t[1]).powi(2);
    }
    acc / windows.len() as f64
}

/// Train a hybrid canceller on a dataset: least-squares linear stage, then
/// mini-batch Adam on the normalized residual. Returns the model together
/// with a per-epoch log whose entries are frozen-weight re-evaluations.
pub fn train(
    ds: &Dataset,
    l: u32,
    n_l: u32,
    n_h: u32,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let l_us = l as usize;
    let x = ds.x.samples();
    let y = ds.y.samples();
    let split = ds.split_index;
    if split < 4 * l_us + 16 {
        return Err(TrainError::DatasetTooSmall(format!(
            "training split of {split} samples cannot support a window of {l_us}"
        )));
    }

    // Step 1: linear canceller on the raw training split.
    let lin = fit_linear(&x[..split], &y[..split], l_us)?;
    let mut ops = OpCounter::new();
    let lin_hat = apply_linear(&lin, x, &mut ops);

    // Step 2: residual target, normalized with training-split statistics and
    // a power-of-two scale.
    let train_idx: Vec<usize> = (l_us - 1..split).collect();
    let test_idx: Vec<usize> = (split.max(l_us - 1)..x.len()).collect();
    let residual = |n: usize| y[n] - lin_hat.samples[n];
    let mean: Complex64 =
        train_idx.iter().map(|&n| residual(n)).sum::<Complex64>() / train_idx.len() as f64;
    let var: f64 = train_idx.iter().map(|&n| (residual(n) - mean).norm_sqr()).sum::<f64>()
        / train_idx.len() as f64;
    let shift = power_of_two_exponent(var.sqrt());
    let scale = (2.0f64).powi(shift);

    let input_mean = ds.norm.x_mean_c();
    let input_var = ds.norm.x_var;
    let inv_sigma_x = 1.0 / input_var.sqrt();

    let make_window = |n: usize| {
        let mut w = vec![0.0f64; 2 * l_us];
        for k in 0..l_us {
            let v = (x[n - k] - input_mean) * inv_sigma_x;
            w[2 * k] = v.re;
            w[2 * k + 1] = v.im;
        }
        w
    };
    let make_target = |n: usize| {
        let t = (residual(n) - mean) / scale;
        [t.re, t.im]
    };
    let train_windows: Vec<Vec<f64>> = train_idx.iter().map(|&n| make_window(n)).collect();
    let train_targets: Vec<[f64; 2]> = train_idx.iter().map(|&n| make_target(n)).collect();
    let test_windows: Vec<Vec<f64>> = test_idx.iter().map(|&n| make_window(n)).collect();
    let test_targets: Vec<[f64; 2]> = test_idx.iter().map(|&n| make_target(n)).collect();

    // Step 3: mini-batch Adam.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Net::init(l, n_l, n_h, &mut rng);
    let mut adam = Adam::new(&net);
    let mut grads = Grads::zeros_like(&net);
    let mut order: Vec<usize> = (0..train_windows.len()).collect();
    let mut acts: Vec<Vec<f64>> = Vec::new();
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        // Deterministic shuffle from the training seed.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(cfg.batch_size) {
            grads.reset();
            for &k in batch {
                net.forward_cached(&train_windows[k], &mut acts);
                net.accumulate_gradient(&acts, train_targets[k], &mut grads);
            }
            adam.update(&mut net, &grads, cfg, batch.len());
        }

        let train_mse = mse_over(&net, &train_windows, &train_targets);
        if !train_mse.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let test_mse = if test_windows.is_empty() {
            f64::NAN
        } else {
            mse_over(&net, &test_windows, &test_targets)
        };
        let c_db_total = if test_idx.is_empty() {
            f64::NAN
        } else {
            let mut recon = Vec::with_capacity(test_idx.len());
            for (w, &n) in test_windows.iter().zip(&test_idx) {
                let out = net.forward_cached(w, &mut acts);
                let y_nl = mean + Complex64::new(out[0] * scale, out[1] * scale);
                recon.push(lin_hat.samples[n] + y_nl);
            }
            let reference: Vec<Complex64> = test_idx.iter().map(|&n| y[n]).collect();
            metrics::c_db(&reference, &recon).unwrap_or(f64::NAN)
        };
        log.epochs.push(EpochLog { epoch, train_mse, test_mse, c_db_total });
    }

    let model = NnModel::new(
        l,
        n_l,
        n_h,
        net.weights,
        net.biases,
        lin,
        (shift, shift),
        mean,
        input_mean,
        input_var,
    );
    Ok(TrainOutcome { model, log })
}

/// Numerical self-diagnostic: compare the backpropagated gradient of a
/// randomly initialized network against central finite differences on a
/// random batch. Returns the worst relative error over every weight and
/// bias; a healthy implementation sits far below 1e-5.
pub fn gradient_check(l: u32, n_l: u32, n_h: u32, batch: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Net::init(l, n_l, n_h, &mut rng);
    let windows: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..2 * l as usize).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let targets: Vec<[f64; 2]> =
        (0..batch).map(|_| [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]).collect();
    let loss = |net: &Net| -> f64 {
        let mut acts = Vec::new();
        windows
            .iter()
            .zip(&targets)
            .map(|(w, t)| {
                let o = net.forward_cached(w, &mut acts);
                (o[0] - t[0]).powi(2) + (o[1] - t[1]).powi(2)
            })
            .sum()
    };
    let mut grads = Grads::zeros_like(&net);
    let mut acts = Vec::new();
    for (w, t) in windows.iter().zip(&targets) {
        net.forward_cached(w, &mut acts);
        net.accumulate_gradient(&acts, *t, &mut grads);
    }
    let h = 1e-6;
    let mut worst = 0.0f64;
    for layer in 0..net.weights.len() {
        for i in 0..net.weights[layer].data.len() {
            let orig = net.weights[layer].data[i];
            net.weights[layer].data[i] = orig + h;
            let up = loss(&net);
            net.weights[layer].data[i] = orig - h;
            let down = loss(&net);
            net.weights[layer].data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.weights[layer].data[i];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            worst = worst.max(((numeric - analytic) / denom).abs());
        }
        for i in 0..net.biases[layer].len() {
            let orig = net.biases[layer][i];
            net.biases[layer][i] = orig + h;
            let up = loss(&net);
            net.biases[layer][i] = orig - h;
            let down = loss(&net);
            net.biases[layer][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.biases[layer][i];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            worst = worst.max(((numeric - analytic) / denom).abs());
        }
    }
    worst
}

/// Re-evaluate the training-split loss of a stored model exactly as the
/// trainer logs it, for log-consistency checks.
pub fn reevaluate_train_mse(ds: &Dataset, model: &NnModel) -> f64 {
    let l_us = model.window_len() as usize;
    let x = ds.x.samples();
    let y = ds.y.samples();
    let mut ops = OpCounter::new();
    let lin_hat = apply_linear(&model.lin, x, &mut ops);
    let scale = (2.0f64).powi(model.denorm_shift.0);
    let net = Net { weights: model.weights.clone(), biases: model.biases.clone() };
    let inv_sigma_x = 1.0 / model.input_var.sqrt();
    let idx: Vec<usize> = (l_us - 1..ds.split_index).collect();
    let windows: Vec<Vec<f64>> = idx
        .iter()
        .map(|&n| {
            let mut w = vec![0.0f64; 2 * l_us];
            for k in 0..l_us {
                let v = (x[n - k] - model.input_mean) * inv_sigma_x;
                w[2 * k] = v.re;
                w[2 * k + 1] = v.im;
            }
            w
        })
        .collect();
    let targets: Vec<[f64; 2]> = idx
        .iter()
        .map(|&n| {
            let t = (y[n] - lin_hat.samples[n] - model.denorm_mean) / scale;
            [t.re, t.im]
        })
        .collect();
    mse_over(&net, &windows, &targets)
}
