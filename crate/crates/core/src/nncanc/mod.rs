//! Hybrid neural-network self-interference canceller.
//!
//! The received leakage splits into a linear part and a much weaker
//! non-linear part. A plain FIR canceller removes the linear part; a small
//! feedforward network reconstructs only the non-linear residual from the
//! real and imaginary parts of the last `L` transmit samples. Keeping the
//! network away from the dominant linear component is what lets a handful of
//! neurons compete with a polynomial canceller.
//!
//! Signals entering the network are normalized to zero mean and unit
//! variance; the network output is denormalized by a power-of-two scale
//! (a hardware shift) plus the stored residual mean.

pub mod fxp;
mod train;

use serde::{Deserialize, Serialize};

use crate::lincanc::{apply_linear, LinModel};
use crate::opcount::OpCounter;
use crate::signal::Reconstruction;
use crate::Complex64;

pub use fxp::{nn_forward_fxp, quantize_nn, FxpNnPlan, QuantizedNn};
pub use train::{
    gradient_check, reevaluate_train_mse, train, EpochLog, TrainConfig, TrainError, TrainLog,
    TrainOutcome,
};

/// Activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

/// Dense row-major matrix: `rows` neurons by `cols` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RealMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.data[row * self.cols + col]
    }
}

/// Hybrid canceller state: the network weights plus the parallel linear
/// canceller and the normalization constants baked in at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct NnModel {
    l: u32,
    n_l: u32,
    n_h: u32,
    pub weights: Vec<RealMat>,
    pub biases: Vec<Vec<f64>>,
    pub activations: Vec<Activation>,
    pub lin: LinModel,
    /// Power-of-two denormalization exponents for the two outputs.
    pub denorm_shift: (i32, i32),
    /// Residual mean restored after denormalization.
    pub denorm_mean: Complex64,
    /// Input normalization: `(x - input_mean) / sqrt(input_var)`.
    pub input_mean: Complex64,
    pub input_var: f64,
}

/// Layer widths for the given dimensions: `2L` inputs, `N_l` hidden layers
/// of `N_h` neurons, 2 outputs.
pub fn layer_dims(l: u32, n_l: u32, n_h: u32) -> Vec<usize> {
    let mut dims = Vec::with_capacity(n_l as usize + 2);
    dims.push(2 * l as usize);
    dims.extend(std::iter::repeat(n_h as usize).take(n_l as usize));
    dims.push(2);
    dims
}

impl NnModel {
    /// Assemble a model from parts, checking shape consistency.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        l: u32,
        n_l: u32,
        n_h: u32,
        weights: Vec<RealMat>,
        biases: Vec<Vec<f64>>,
        lin: LinModel,
        denorm_shift: (i32, i32),
        denorm_mean: Complex64,
        input_mean: Complex64,
        input_var: f64,
    ) -> Self {
        assert!(l >= 1 && n_l >= 1 && n_h >= 1, "network dimensions must be positive");
        let dims = layer_dims(l, n_l, n_h);
        assert_eq!(weights.len(), dims.len() - 1, "one weight matrix per layer");
        assert_eq!(biases.len(), weights.len());
        for (i, w) in weights.iter().enumerate() {
            assert_eq!((w.rows, w.cols), (dims[i + 1], dims[i]), "layer {i} shape");
            assert_eq!(biases[i].len(), dims[i + 1]);
        }
        assert_eq!(lin.memory_len(), l as usize, "linear canceller must share the window");
        assert!(input_var > 0.0);
        let mut activations = vec![Activation::Relu; n_l as usize];
        activations.push(Activation::Identity);
        Self {
            l,
            n_l,
            n_h,
            weights,
            biases,
            activations,
            lin,
            denorm_shift,
            denorm_mean,
            input_mean,
            input_var,
        }
    }

    /// A model whose network contributes exactly nothing: zero weights,
    /// zero denormalization. Its hybrid output equals the linear canceller.
    pub fn null_network(lin: LinModel, n_l: u32, n_h: u32) -> Self {
        let l = lin.memory_len() as u32;
        let dims = layer_dims(l, n_l, n_h);
        let weights =
            (0..dims.len() - 1).map(|i| RealMat::zeros(dims[i + 1], dims[i])).collect();
        let biases = (1..dims.len()).map(|i| vec![0.0; dims[i]]).collect();
        Self::new(
            l,
            n_l,
            n_h,
            weights,
            biases,
            lin,
            (0, 0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            1.0,
        )
    }

    pub fn window_len(&self) -> u32 {
        self.l
    }

    pub fn hidden_layers(&self) -> u32 {
        self.n_l
    }

    pub fn hidden_width(&self) -> u32 {
        self.n_h
    }

    /// Normalize one transmit sample with the model's input statistics.
    pub fn normalize_input(&self, v: Complex64) -> Complex64 {
        (v - self.input_mean) / self.input_var.sqrt()
    }

    /// Denormalize a network output pair into signal units.
    pub fn denormalize(&self, out: [f64; 2]) -> Complex64 {
        self.denorm_mean
            + Complex64::new(
                out[0] * (2.0f64).powi(self.denorm_shift.0),
                out[1] * (2.0f64).powi(self.denorm_shift.1),
            )
    }

    /// Fill `window` with the normalized network inputs for output index `n`:
    /// `[Re x[n], Im x[n], ..., Re x[n-L+1], Im x[n-L+1]]`.
    pub fn fill_window(&self, x: &[Complex64], n: usize, window: &mut [f64]) {
        debug_assert_eq!(window.len(), 2 * self.l as usize);
        for k in 0..self.l as usize {
            let v = self.normalize_input(x[n - k]);
            window[2 * k] = v.re;
            window[2 * k + 1] = v.im;
        }
    }
}

/// Forward pass of the network alone: a `2L`-real window in, the two
/// normalized residual components out. Panics on a window length mismatch.
pub fn nn_forward(m: &NnModel, window: &[f64]) -> [f64; 2] {
    let mut ops = OpCounter::new();
    nn_forward_counted(m, window, &mut ops)
}

/// Forward pass that also counts datapath operations: each neuron costs one
/// multiplication per input, `inputs - 1` summation additions and one bias
/// addition, and ReLU costs one addition-equivalent. Normalization and
/// denormalization stay outside the counter.
pub fn nn_forward_counted(m: &NnModel, window: &[f64], ops: &mut OpCounter) -> [f64; 2] {
    assert_eq!(
        window.len(),
        2 * m.l as usize,
        "window must hold 2L reals (got {}, expected {})",
        window.len(),
        2 * m.l
    );
    let mut current: Vec<f64> = window.to_vec();
    for (layer, w) in m.weights.iter().enumerate() {
        let mut next = vec![0.0f64; w.rows];
        for (j, slot) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..w.cols {
                acc += w.at(j, i) * current[i];
            }
            ops.mul(w.cols as u64);
            ops.add(w.cols as u64 - 1);
            acc += m.biases[layer][j];
            ops.add(1);
            *slot = match m.activations[layer] {
                Activation::Relu => {
                    ops.add(1);
                    acc.max(0.0)
                }
                Activation::Identity => acc,
            };
        }
        current = next;
    }
    [current[0], current[1]]
}

/// Full hybrid evaluation: linear canceller plus denormalized network
/// output. The counter receives the network cost, the linear-canceller cost
/// and the two additions that combine the branches, which together match the
/// closed-form canceller complexity.
pub fn apply_hybrid(m: &NnModel, x: &[Complex64], ops: &mut OpCounter) -> Reconstruction {
    let l = m.l as usize;
    let linear = apply_linear(&m.lin, x, ops);
    let mut samples = vec![Complex64::new(0.0, 0.0); x.len()];
    let mut window = vec![0.0f64; 2 * l];
    for n in (l - 1)..x.len() {
        m.fill_window(x, n, &mut window);
        let out = nn_forward_counted(m, &window, ops);
        let y_nl = m.denormalize(out);
        ops.add(2);
        samples[n] = linear.samples[n] + y_nl;
    }
    Reconstruction { samples, valid_from: l - 1 }
}

#[derive(Serialize, Deserialize)]
struct MatWire {
    rows: usize,
    cols: usize,
    data: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NnModelWire {
    #[serde(rename = "L")]
    l: u32,
    #[serde(rename = "N_l")]
    n_l: u32,
    #[serde(rename = "N_h")]
    n_h: u32,
    activations: Vec<Activation>,
    weights: Vec<MatWire>,
    biases: Vec<Vec<String>>,
    lin_taps: Vec<[String; 2]>,
    denorm_shift: [i32; 2],
    denorm_mean: [String; 2],
    input_mean: [String; 2],
    input_var: String,
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that parses back to the identical bits.
    format!("{v:?}")
}

fn parse_f64(s: &str) -> Result<f64, serde_json::Error> {
    s.parse::<f64>().map_err(serde::de::Error::custom)
}

impl NnModel {
    /// Serialize with weights as decimal strings, which round-trip float64
    /// exactly regardless of the JSON reader's number handling.
    pub fn to_json(&self) -> String {
        let wire = NnModelWire {
            l: self.l,
            n_l: self.n_l,
            n_h: self.n_h,
            activations: self.activations.clone(),
            weights: self
                .weights
                .iter()
                .map(|w| MatWire {
                    rows: w.rows,
                    cols: w.cols,
                    data: w.data.iter().map(|&v| fmt_f64(v)).collect(),
                })
                .collect(),
            biases: self
                .biases
                .iter()
                .map(|b| b.iter().map(|&v| fmt_f64(v)).collect())
                .collect(),
            lin_taps: self
                .lin
                .taps()
                .iter()
                .map(|t| [fmt_f64(t.re), fmt_f64(t.im)])
                .collect(),
            denorm_shift: [self.denorm_shift.0, self.denorm_shift.1],
            denorm_mean: [fmt_f64(self.denorm_mean.re), fmt_f64(self.denorm_mean.im)],
            input_mean: [fmt_f64(self.input_mean.re), fmt_f64(self.input_mean.im)],
            input_var: fmt_f64(self.input_var),
        };
        serde_json::to_string_pretty(&wire).expect("serializing a network model cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let wire: NnModelWire = serde_json::from_str(s)?;
        let mut weights = Vec::with_capacity(wire.weights.len());
        for mw in &wire.weights {
            let mut data = Vec::with_capacity(mw.data.len());
            for d in &mw.data {
                data.push(parse_f64(d)?);
            }
            weights.push(RealMat { rows: mw.rows, cols: mw.cols, data });
        }
        let mut biases = Vec::with_capacity(wire.biases.len());
        for bw in &wire.biases {
            let mut b = Vec::with_capacity(bw.len());
            for d in bw {
                b.push(parse_f64(d)?);
            }
            biases.push(b);
        }
        let mut taps = Vec::with_capacity(wire.lin_taps.len());
        for t in &wire.lin_taps {
            taps.push(Complex64::new(parse_f64(&t[0])?, parse_f64(&t[1])?));
        }
        Ok(Self::new(
            wire.l,
            wire.n_l,
            wire.n_h,
            weights,
            biases,
            LinModel::new(taps),
            (wire.denorm_shift[0], wire.denorm_shift[1]),
            Complex64::new(parse_f64(&wire.denorm_mean[0])?, parse_f64(&wire.denorm_mean[1])?),
            Complex64::new(parse_f64(&wire.input_mean[0])?, parse_f64(&wire.input_mean[1])?),
            parse_f64(&wire.input_var)?,
        ))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::metrics::{complexity, ComplexitySpec};
    use crate::signal::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_model(l: u32, n_l: u32, n_h: u32, seed: u64) -> NnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = layer_dims(l, n_l, n_h);
        let weights: Vec<RealMat> = (0..dims.len() - 1)
            .map(|i| {
                let mut m = RealMat::zeros(dims[i + 1], dims[i]);
                m.data.iter_mut().for_each(|v| *v = rng.gen::<f64>() - 0.5);
                m
            })
            .collect();
        let biases: Vec<Vec<f64>> = (1..dims.len())
            .map(|i| (0..dims[i]).map(|_| rng.gen::<f64>() - 0.5).collect())
            .collect();
        let lin = LinModel::new(
            (0..l).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect(),
        );
        NnModel::new(l, n_l, n_h, weights, biases, lin, (-2, -2), c(0.01, -0.02), c(0.0, 0.0), 1.0)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = NnModel::null_network(LinModel::new(vec![c(1.0, 0.0), c(0.0, 0.0)]), 1, 8);
        let out = nn_forward(&m, &[0.3, -0.2, 0.9, 0.4]);
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn hand_worked_forward_pass_matches_test_vector() {
        // Small fixed network checked by hand; the vector file pins inputs,
        // parameters and expected outputs.
        let raw = include_str!("../../tests/data/nn_forward_hand.json");
        let v: serde_json::Value = serde_json::from_str(raw).unwrap();
        let model = NnModel::from_json(&v["model"].to_string()).unwrap();
        for case in v["cases"].as_array().unwrap() {
            let window: Vec<f64> =
                case["window"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            let expect: Vec<f64> =
                case["output"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            let got = nn_forward(&model, &window);
            assert_eq!(got[0], expect[0], "re mismatch for {case}");
            assert_eq!(got[1], expect[1], "im mismatch for {case}");
        }
    }

    #[test]
    fn op_counts_match_closed_forms_on_grid() {
        let x: Vec<Complex64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..40).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
        };
        for l in [1u32, 2, 3, 4, 6] {
            for n_l in [1u32, 2, 3] {
                for n_h in [1u32, 4, 8, 16] {
                    let m = random_model(l, n_l, n_h, (l * 100 + n_l * 10 + n_h) as u64);
                    let mut ops = OpCounter::new();
                    let rec = apply_hybrid(&m, &x, &mut ops);
                    let valid = (x.len() - rec.valid_from) as u64;
                    let expect = complexity(ComplexitySpec::Nn { l, n_l, n_h }).unwrap();
                    assert_eq!(ops.real_mul, valid * expect.n_mul, "mul L={l} N_l={n_l} N_h={n_h}");
                    assert_eq!(ops.real_add, valid * expect.n_add, "add L={l} N_l={n_l} N_h={n_h}");
                }
            }
        }
    }

    #[test]
    fn hybrid_is_literal_recomposition() {
        let m = random_model(3, 2, 5, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let x: Vec<Complex64> =
            (0..64).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let mut ops = OpCounter::new();
        let hybrid = apply_hybrid(&m, &x, &mut ops);
        let linear = apply_linear(&m.lin, &x, &mut OpCounter::new());
        let mut window = vec![0.0; 6];
        for n in hybrid.valid_from..x.len() {
            m.fill_window(&x, n, &mut window);
            let expect = linear.samples[n] + m.denormalize(nn_forward(&m, &window));
            assert_eq!(hybrid.samples[n], expect);
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let m = random_model(2, 1, 8, 91);
        let s = m.to_json();
        let back = NnModel::from_json(&s).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    #[should_panic(expected = "window must hold 2L reals")]
    fn wrong_window_length_panics() {
        let m = random_model(2, 1, 4, 3);
        nn_forward(&m, &[0.0; 3]);
    }
}
