//! Fixed-point inference path of the polynomial canceller.
//!
//! The hardware feeds every complex MAC unit (CPE) values of a common
//! bit-width `Q`. Basis functions grow like `|x|^p`, so the input is first
//! rescaled by a power of two chosen so that the scaped peak stays near one;
//! with `|x'| <= 1.25` even a ninth-order basis function stays inside the
//! four integer bits of the default `Q-4` fraction split. The coefficients
//! absorb the inverse scaling (`c' = c * 2^(k*p)`), so outputs come back in
//! true signal units without a final shift.
//!
//! Term-to-CPE assignment and reduction order mirror the hardware schedule:
//! terms whose basis functions sit in the circular buffer (lags >= 1) come
//! first in lexicographic `(p, q, lag)` order, then the fresh sample's terms
//! in `(p, q)` order; CPE `i` takes terms `i, i + N_CPE, ...` and accumulates
//! them sequentially, and a pairwise adder tree over the CPE partial sums
//! produces the output. The cycle simulator follows the identical order, so
//! the two must agree bit for bit.

use crate::fxp::{
    cadd, cmul3, fxp_tree_sum_complex, quantize_complex, FxpComplex, FxpError, FxpFormat,
    FxpReconstruction,
};
use crate::opcount::OpCounter;
use crate::Complex64;

use super::bf::{self, BfBuffer};
use super::PolyModel;

/// Smallest power-of-two downshift that brings `peak` to at most 1.25, the
/// headroom under which `|x'|^9` still fits four integer bits.
pub fn shift_for_peak(peak: f64) -> i32 {
    let mut k = 0;
    let mut p = peak.abs();
    while p > 1.25 && k < 40 {
        p /= 2.0;
        k += 1;
    }
    k
}

/// Polynomial model quantized for fixed-point evaluation.
#[derive(Debug, Clone)]
pub struct QuantizedPoly {
    p_max: u32,
    l: u32,
    fmt: FxpFormat,
    /// Input samples are scaled by `2^-input_shift` before quantization.
    input_shift: i32,
    /// Coefficients in hardware term order (old lags first), pre-scaled by
    /// `2^(input_shift * p)`.
    coeffs: Vec<FxpComplex>,
    /// Saturation seen while quantizing the coefficients.
    coeff_saturated: bool,
}

/// One term of the hardware evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermIndex {
    pub p: u32,
    pub q: u32,
    pub lag: u32,
}

/// Hardware term order: every buffered-lag term (lexicographic `(p, q, lag)`
/// over lags >= 1), then the fresh sample's terms (lag 0).
pub fn term_order(p_max: u32, l: u32) -> Vec<TermIndex> {
    let indices = bf::bf_indices(p_max);
    let mut terms = Vec::with_capacity(indices.len() * l as usize);
    if l > 1 {
        for idx in &indices {
            for lag in 1..l {
                terms.push(TermIndex { p: idx.p, q: idx.q, lag });
            }
        }
    }
    for idx in &indices {
        terms.push(TermIndex { p: idx.p, q: idx.q, lag: 0 });
    }
    terms
}

impl QuantizedPoly {
    /// Quantize `m` for inputs whose complex magnitude peaks at `peak_abs`.
    pub fn new(m: &PolyModel, fmt: FxpFormat, peak_abs: f64) -> Self {
        let input_shift = shift_for_peak(peak_abs);
        let order = term_order(m.p_max(), m.memory_len());
        let mut coeff_saturated = false;
        let coeffs = order
            .iter()
            .map(|t| {
                let scale = (2.0f64).powi(input_shift * t.p as i32);
                let q = quantize_complex(m.coeff(t.p, t.q, t.lag) * scale, fmt);
                coeff_saturated |= q.saturated();
                q
            })
            .collect();
        Self { p_max: m.p_max(), l: m.memory_len(), fmt, input_shift, coeffs, coeff_saturated }
    }

    pub fn p_max(&self) -> u32 {
        self.p_max
    }

    pub fn memory_len(&self) -> u32 {
        self.l
    }

    pub fn fmt(&self) -> FxpFormat {
        self.fmt
    }

    pub fn input_shift(&self) -> i32 {
        self.input_shift
    }

    pub fn coeff_saturated(&self) -> bool {
        self.coeff_saturated
    }

    /// Coefficient for the `i`-th term of [`term_order`].
    pub fn term_coeff(&self, i: usize) -> FxpComplex {
        self.coeffs[i]
    }

    pub fn n_bf(&self) -> usize {
        self.coeffs.len()
    }

    /// Quantize one input sample into the scaled fixed-point domain.
    pub fn quantize_input(&self, x: Complex64) -> FxpComplex {
        let scale = (2.0f64).powi(-self.input_shift);
        quantize_complex(x * scale, self.fmt)
    }
}

/// Fixed-point basis-function computation: the order-2 recurrence evaluated
/// with quantizing complex multipliers. Returns the per-sample set and the
/// number of recurrence multiplications (the same count as the float path).
pub fn bf_dp_fxp(
    x: FxpComplex,
    p_max: u32,
    ops: &mut OpCounter,
) -> Result<(Vec<FxpComplex>, u64), FxpError> {
    assert!(p_max % 2 == 1, "order must be odd");
    let mut values = Vec::with_capacity(bf::per_sample_count(p_max));
    values.push(x.conj()?);
    values.push(x);
    let mut mul_count = 0u64;
    if p_max >= 3 {
        let xsq = cmul3(x, x, ops)?;
        let mut p = 3;
        while p <= p_max {
            let base = values.len();
            values.resize(base + p as usize + 1, x);
            for q in (p + 1) / 2..=p {
                let prev = values[bf::flat_index(p - 2, q - 2)];
                let v = cmul3(xsq, prev, ops)?;
                mul_count += 1;
                values[base + q as usize] = v;
                values[base + (p - q) as usize] = v.conj()?;
            }
            p += 2;
        }
    }
    Ok((values, mul_count))
}

/// Functional fixed-point evaluation in the hardware value order for an
/// array of `n_cpe` complex MAC units. This is the bit-exact reference the
/// cycle simulator is checked against.
///
/// `ops` receives the weighted-sum cost (MACs and combining additions);
/// basis-function multiplications are kept out of it, matching the
/// closed-form accounting.
pub fn apply_poly_fxp(
    qm: &QuantizedPoly,
    x: &[Complex64],
    n_cpe: usize,
    ops: &mut OpCounter,
) -> Result<FxpReconstruction, FxpError> {
    assert!(n_cpe >= 1 && n_cpe <= qm.coeffs.len(), "CPE count must be in 1..=N_BF");
    let l = qm.l as usize;
    let order = term_order(qm.p_max, qm.l);
    let mut buffer: BfBuffer<FxpComplex> = BfBuffer::new(l, qm.p_max);
    let mut bf_ops = OpCounter::new();
    let mut samples = vec![FxpComplex::zero(qm.fmt); x.len()];

    for n in 0..x.len() {
        let xin = qm.quantize_input(x[n]);
        let (fresh, _muls) = bf_dp_fxp(xin, qm.p_max, &mut bf_ops)?;
        if n + 1 >= l {
            let mut partials: Vec<Option<FxpComplex>> = vec![None; n_cpe];
            for (t, term) in order.iter().enumerate() {
                let value = if term.lag == 0 {
                    fresh[bf::flat_index(term.p, term.q)]
                } else {
                    buffer.lagged(term.lag as usize)[bf::flat_index(term.p, term.q)]
                };
                let prod = cmul3(qm.coeffs[t], value, ops)?;
                let slot = t % n_cpe;
                partials[slot] = Some(match partials[slot] {
                    None => prod,
                    Some(acc) => cadd(acc, prod, ops)?,
                });
            }
            let materialized: Vec<FxpComplex> =
                partials.into_iter().map(|p| p.unwrap_or(FxpComplex::zero(qm.fmt))).collect();
            samples[n] = fxp_tree_sum_complex(&materialized, ops)?;
        }
        buffer.push(fresh);
    }
    Ok(FxpReconstruction { samples, valid_from: l - 1 })
}
