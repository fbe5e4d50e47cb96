//! Fixed-point inference path of the hybrid canceller.
//!
//! Weights, biases and partial sums share one saturating `Q`-bit format.
//! Saturating addition makes the reduction order observable, so the value
//! semantics of every neuron are pinned by an explicit plan that mirrors the
//! processing-element schedule of the hardware pipeline:
//!
//! * a neuron-by-neuron (NBN) layer splits each neuron's products over
//!   `g = min(N_PE, inputs)` partial sums by stride, accumulates each
//!   partial in ascending input order, then combines them with a pairwise
//!   adder tree before adding the bias;
//! * an input-by-input (IBI) layer accumulates each neuron's products in
//!   plain ascending input order and adds the bias last.
//!
//! Layers alternate NBN, IBI, NBN, ... from the input side. The cycle
//! simulator performs the same arithmetic through its PE state machines, so
//! the two paths must agree bit for bit.
//!
//! The residual mean is folded into the output-layer bias (scaled by the
//! inverse denormalization shift), so denormalization itself is a pure
//! power-of-two shift.

use crate::fxp::{
    cadd, cmul3, fxp_add, fxp_mul, fxp_shift, fxp_tree_sum, quantize, quantize_complex,
    FxpComplex, FxpError, FxpFormat, FxpReal, FxpReconstruction,
};
use crate::opcount::OpCounter;
use crate::Complex64;

use super::{Activation, NnModel};

/// Value-ordering of one layer's accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerOrder {
    /// Neuron-by-neuron: strided partials of the given group width plus a
    /// pairwise tree.
    Nbn { group: usize },
    /// Input-by-input: one ascending accumulation per neuron.
    Ibi,
}

/// Per-layer accumulation plan. Layers alternate NBN and IBI starting with
/// NBN at the first hidden layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FxpNnPlan {
    pub layers: Vec<LayerOrder>,
}

impl FxpNnPlan {
    /// Plan with the alternation pinned and NBN group widths equal to the
    /// layer input counts (one PE per input), the fully parallel neuron.
    pub fn fully_parallel(dims: &[usize]) -> Self {
        let layers = (0..dims.len() - 1)
            .map(|i| if i % 2 == 0 { LayerOrder::Nbn { group: dims[i] } } else { LayerOrder::Ibi })
            .collect();
        Self { layers }
    }

    /// Plan derived from per-layer PE counts: NBN layers group by
    /// `min(N_PE, inputs)`, IBI layers are order-insensitive to the PE count.
    pub fn from_pe_counts(dims: &[usize], n_pe: &[u32]) -> Self {
        assert_eq!(n_pe.len(), dims.len() - 1, "one PE count per layer");
        let layers = (0..dims.len() - 1)
            .map(|i| {
                if i % 2 == 0 {
                    LayerOrder::Nbn { group: (n_pe[i] as usize).min(dims[i]).max(1) }
                } else {
                    LayerOrder::Ibi
                }
            })
            .collect();
        Self { layers }
    }
}

/// Hybrid canceller quantized for fixed-point evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedNn {
    pub dims: Vec<usize>,
    pub fmt: FxpFormat,
    pub plan: FxpNnPlan,
    /// Row-major weights per layer.
    pub weights: Vec<Vec<FxpReal>>,
    /// Biases per layer; the output layer carries the folded residual mean.
    pub biases: Vec<Vec<FxpReal>>,
    pub activations: Vec<Activation>,
    pub lin_taps: Vec<FxpComplex>,
    /// Complex MACs of the parallel linear canceller; taps are assigned
    /// round-robin and the partial sums reduce through a pairwise tree, so
    /// this count is part of the value semantics.
    pub lin_cpe: usize,
    pub denorm_shift: (i32, i32),
    pub input_mean: Complex64,
    pub input_var: f64,
    /// Saturation seen while quantizing parameters.
    pub params_saturated: bool,
}

/// Quantize a trained model for the given format and accumulation plan.
pub fn quantize_nn(m: &NnModel, fmt: FxpFormat, plan: FxpNnPlan) -> QuantizedNn {
    let dims = super::layer_dims(m.window_len(), m.hidden_layers(), m.hidden_width());
    assert_eq!(plan.layers.len(), dims.len() - 1, "plan must cover every layer");
    let mut saturated = false;
    let mut q = |v: f64| {
        let r = quantize(v, fmt);
        saturated |= r.saturated();
        r
    };
    let weights: Vec<Vec<FxpReal>> =
        m.weights.iter().map(|w| w.data.iter().map(|&v| q(v)).collect()).collect();
    let mut biases: Vec<Vec<FxpReal>> =
        m.biases.iter().map(|b| b.iter().map(|&v| q(v)).collect()).collect();
    // Fold the residual mean into the output bias in normalized units, so
    // the shift restores signal units for bias and activations alike.
    let out_idx = biases.len() - 1;
    let mean_scaled = [
        m.denorm_mean.re / (2.0f64).powi(m.denorm_shift.0),
        m.denorm_mean.im / (2.0f64).powi(m.denorm_shift.1),
    ];
    for (k, b) in biases[out_idx].iter_mut().enumerate() {
        *b = q(m.biases[out_idx][k] + mean_scaled[k]);
    }
    let lin_taps = m
        .lin
        .taps()
        .iter()
        .map(|t| {
            let v = quantize_complex(*t, fmt);
            saturated |= v.saturated();
            v
        })
        .collect();
    QuantizedNn {
        dims,
        fmt,
        plan,
        weights,
        biases,
        activations: m.activations.clone(),
        lin_taps,
        lin_cpe: 1,
        denorm_shift: m.denorm_shift,
        input_mean: m.input_mean,
        input_var: m.input_var,
        params_saturated: saturated,
    }
}

impl QuantizedNn {
    pub fn window_len(&self) -> usize {
        self.dims[0] / 2
    }

    /// Normalize and quantize one window of raw samples for output index `n`.
    pub fn quantize_window(&self, x: &[Complex64], n: usize, out: &mut Vec<FxpReal>) {
        out.clear();
        let inv_sigma = 1.0 / self.input_var.sqrt();
        for k in 0..self.window_len() {
            let v = (x[n - k] - self.input_mean) * inv_sigma;
            out.push(quantize(v.re, self.fmt));
            out.push(quantize(v.im, self.fmt));
        }
    }
}

fn neuron_nbn(
    row: &[FxpReal],
    inputs: &[FxpReal],
    bias: FxpReal,
    group: usize,
    ops: &mut OpCounter,
) -> Result<FxpReal, FxpError> {
    let cols = inputs.len();
    let g = group.clamp(1, cols);
    let mut partials = Vec::with_capacity(g);
    for p in 0..g {
        let mut acc: Option<FxpReal> = None;
        let mut i = p;
        while i < cols {
            let prod = fxp_mul(row[i], inputs[i])?;
            ops.mul(1);
            acc = Some(match acc {
                None => prod,
                Some(a) => {
                    ops.add(1);
                    fxp_add(a, prod)?
                }
            });
            i += g;
        }
        partials.push(acc.expect("group width bounded by input count"));
    }
    let sum = fxp_tree_sum(&partials, ops)?;
    ops.add(1);
    fxp_add(sum, bias)
}

fn neuron_ibi(
    row: &[FxpReal],
    inputs: &[FxpReal],
    bias: FxpReal,
    ops: &mut OpCounter,
) -> Result<FxpReal, FxpError> {
    let mut acc: Option<FxpReal> = None;
    for (w, x) in row.iter().zip(inputs) {
        let prod = fxp_mul(*w, *x)?;
        ops.mul(1);
        acc = Some(match acc {
            None => prod,
            Some(a) => {
                ops.add(1);
                fxp_add(a, prod)?
            }
        });
    }
    ops.add(1);
    fxp_add(acc.expect("layers have at least one input"), bias)
}

/// Fixed-point forward pass over an already-normalized real window. The
/// counter receives the same per-neuron costs as the float evaluator.
pub fn nn_forward_fxp(
    qm: &QuantizedNn,
    window: &[f64],
    ops: &mut OpCounter,
) -> Result<[FxpReal; 2], FxpError> {
    assert_eq!(window.len(), qm.dims[0], "window must hold {} reals", qm.dims[0]);
    let mut current: Vec<FxpReal> = window.iter().map(|&v| quantize(v, qm.fmt)).collect();
    forward_layers(qm, &mut current, ops)?;
    Ok([current[0], current[1]])
}

fn forward_layers(
    qm: &QuantizedNn,
    current: &mut Vec<FxpReal>,
    ops: &mut OpCounter,
) -> Result<(), FxpError> {
    for (layer, order) in qm.plan.layers.iter().enumerate() {
        let (rows, cols) = (qm.dims[layer + 1], qm.dims[layer]);
        let mut next = Vec::with_capacity(rows);
        for j in 0..rows {
            let row = &qm.weights[layer][j * cols..(j + 1) * cols];
            let pre = match order {
                LayerOrder::Nbn { group } => {
                    neuron_nbn(row, current, qm.biases[layer][j], *group, ops)?
                }
                LayerOrder::Ibi => neuron_ibi(row, current, qm.biases[layer][j], ops)?,
            };
            next.push(match qm.activations[layer] {
                Activation::Relu => {
                    ops.add(1);
                    pre.relu()
                }
                Activation::Identity => pre,
            });
        }
        *current = next;
    }
    Ok(())
}

/// Full fixed-point hybrid evaluation: quantized FIR plus shifted network
/// output, with the two combining additions counted.
pub fn apply_hybrid_fxp(
    qm: &QuantizedNn,
    x: &[Complex64],
    ops: &mut OpCounter,
) -> Result<FxpReconstruction, FxpError> {
    let l = qm.window_len();
    let fmt = qm.fmt;
    let mut samples = vec![FxpComplex::zero(fmt); x.len()];
    let mut window: Vec<FxpReal> = Vec::with_capacity(2 * l);
    let mut window_f = vec![0.0f64; 2 * l];
    let inv_sigma = 1.0 / qm.input_var.sqrt();
    let lin_cpe = qm.lin_cpe.clamp(1, l);
    for n in (l - 1)..x.len() {
        // Linear branch: round-robin tap assignment over the complex MACs,
        // ascending-lag accumulation per MAC, pairwise tree across them.
        let mut partials: Vec<Option<FxpComplex>> = vec![None; lin_cpe];
        for (lag, tap) in qm.lin_taps.iter().enumerate() {
            let xin = quantize_complex(x[n - lag], fmt);
            let prod = cmul3(*tap, xin, ops)?;
            let slot = lag % lin_cpe;
            partials[slot] = Some(match partials[slot] {
                None => prod,
                Some(a) => cadd(a, prod, ops)?,
            });
        }
        let lanes: Vec<FxpComplex> =
            partials.into_iter().map(|p| p.unwrap_or(FxpComplex::zero(fmt))).collect();
        let lin = crate::fxp::fxp_tree_sum_complex(&lanes, ops)?;

        // Network branch on the normalized window.
        for k in 0..l {
            let v = (x[n - k] - qm.input_mean) * inv_sigma;
            window_f[2 * k] = v.re;
            window_f[2 * k + 1] = v.im;
        }
        window.clear();
        window.extend(window_f.iter().map(|&v| quantize(v, fmt)));
        let mut current = window.clone();
        forward_layers(qm, &mut current, ops)?;
        let nl = FxpComplex::new(
            fxp_shift(current[0], qm.denorm_shift.0),
            fxp_shift(current[1], qm.denorm_shift.1),
        )?;
        samples[n] = cadd(lin, nl, ops)?;
    }
    Ok(FxpReconstruction { samples, valid_from: l - 1 })
}
