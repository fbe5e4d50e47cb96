//! Polynomial (parallel-Hammerstein) self-interference canceller.
//!
//! The canceller reconstructs the non-linear leakage as a weighted sum of
//! basis functions `BF_{p,q}(x[n-l])` over odd orders `p <= P` and lags
//! `l < L`. The model is linear in its coefficients, so fitting is ordinary
//! regularized least squares over the basis-function regressors; evaluation
//! reuses the previous samples' basis functions through a circular buffer so
//! only one sample's worth is computed per step.

pub mod bf;
pub mod fxp;

use serde::{Deserialize, Serialize};

use crate::lincanc::{cmul3_f64, FitError};
use crate::linalg::{cholesky_solve, Hermitian};
use crate::opcount::OpCounter;
use crate::signal::Reconstruction;
use crate::Complex64;

pub use bf::{bf_dp, bf_direct, bf_indices, BfBuffer, BfIndex, BfSet, GaussianInt};

/// Estimated polynomial canceller: maximum odd order `P`, memory length `L`
/// and one complex coefficient per `(p, q, l)` triple, stored in
/// lexicographic `(p, q, l)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyModel {
    p_max: u32,
    l: u32,
    coeffs: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct PolyCoeffWire {
    p: u32,
    q: u32,
    l: u32,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyModelWire {
    #[serde(rename = "P")]
    p: u32,
    #[serde(rename = "L")]
    l: u32,
    coeffs: Vec<PolyCoeffWire>,
}

impl PolyModel {
    /// Build from coefficients in lexicographic `(p, q, l)` order. The count
    /// must equal `L/4 (P+1)(P+3)`.
    pub fn new(p_max: u32, l: u32, coeffs: Vec<Complex64>) -> Self {
        assert!(p_max % 2 == 1, "maximum order must be odd");
        assert!(l >= 1);
        assert_eq!(
            coeffs.len() as u64,
            crate::metrics::bf_count(l, p_max),
            "coefficient count must match the basis-function count"
        );
        Self { p_max, l, coeffs }
    }

    pub fn zeroed(p_max: u32, l: u32) -> Self {
        let n = crate::metrics::bf_count(l, p_max) as usize;
        Self::new(p_max, l, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn p_max(&self) -> u32 {
        self.p_max
    }

    pub fn memory_len(&self) -> u32 {
        self.l
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `(p, q, lag)`.
    pub fn coeff(&self, p: u32, q: u32, lag: u32) -> Complex64 {
        self.coeffs[self.coeff_index(p, q, lag)]
    }

    pub fn set_coeff(&mut self, p: u32, q: u32, lag: u32, v: Complex64) {
        let idx = self.coeff_index(p, q, lag);
        self.coeffs[idx] = v;
    }

    #[inline]
    fn coeff_index(&self, p: u32, q: u32, lag: u32) -> usize {
        debug_assert!(p <= self.p_max && q <= p && lag < self.l);
        bf::flat_index(p, q) * self.l as usize + lag as usize
    }

    pub fn n_bf(&self) -> usize {
        self.coeffs.len()
    }

    pub fn to_json(&self) -> String {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for idx in bf_indices(self.p_max) {
            for lag in 0..self.l {
                let v = self.coeff(idx.p, idx.q, lag);
                coeffs.push(PolyCoeffWire { p: idx.p, q: idx.q, l: lag, re: v.re, im: v.im });
            }
        }
        let wire = PolyModelWire { p: self.p_max, l: self.l, coeffs };
        serde_json::to_string_pretty(&wire).expect("serializing a polynomial model cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let wire: PolyModelWire = serde_json::from_str(s)?;
        let mut model = Self::zeroed(wire.p, wire.l);
        for cw in wire.coeffs {
            model.set_coeff(cw.p, cw.q, cw.l, Complex64::new(cw.re, cw.im));
        }
        Ok(model)
    }
}

/// Least-squares fit of the full odd-order basis up to `p_max` with memory
/// `l`. `y_nl` is the target sequence, normally the residual left by the
/// linear canceller.
pub fn fit_poly(
    x: &[Complex64],
    y_nl: &[Complex64],
    p_max: u32,
    l: u32,
) -> Result<PolyModel, FitError> {
    let basis = bf_indices(p_max);
    let coeffs = fit_poly_with_basis(x, y_nl, p_max, &basis, l)?;
    Ok(PolyModel::new(p_max, l, coeffs))
}

/// Fit with an explicit basis-function subset (coefficients returned in
/// lexicographic `(basis order, lag)` order). Restricting the basis to
/// `(1, 1)` reproduces the linear canceller.
pub(crate) fn fit_poly_with_basis(
    x: &[Complex64],
    y_nl: &[Complex64],
    p_max: u32,
    basis: &[BfIndex],
    l: u32,
) -> Result<Vec<Complex64>, FitError> {
    if l == 0 {
        return Err(FitError::ZeroMemory);
    }
    if x.len() != y_nl.len() {
        return Err(FitError::LengthMismatch(x.len(), y_nl.len()));
    }
    let l = l as usize;
    let n_params = basis.len() * l;
    if x.len() < 4 * n_params {
        return Err(FitError::TooFewSamples { need: 4 * n_params, got: x.len(), params: n_params });
    }

    // One basis-function set per sample, reused across lags.
    let sets: Vec<BfSet<Complex64>> = x
        .iter()
        .map(|&v| bf_dp(v, p_max).expect("order validated above"))
        .collect();

    let mut gram = Hermitian::zeros(n_params);
    let mut rhs = vec![Complex64::new(0.0, 0.0); n_params];
    let mut row = vec![Complex64::new(0.0, 0.0); n_params];
    for n in (l - 1)..x.len() {
        for (bi, idx) in basis.iter().enumerate() {
            for lag in 0..l {
                row[bi * l + lag] = sets[n - lag].get(idx.p, idx.q);
            }
        }
        for i in 0..n_params {
            let ri = row[i].conj();
            rhs[i] += ri * y_nl[n];
            for j in i..n_params {
                *gram.at_mut(i, j) += ri * row[j];
            }
        }
    }
    for i in 0..n_params {
        for j in 0..i {
            *gram.at_mut(i, j) = gram.at(j, i).conj();
        }
    }
    // High-order regressors are near-collinear for low-PAPR signals; scale
    // the ridge with the Gram trace.
    let scale = gram.trace() / n_params as f64;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(FitError::Solve(crate::linalg::SolveError::IllConditioned {
            cond: f64::INFINITY,
        }));
    }
    let eps = 1e-9 * scale;
    gram.regularize(eps);
    let (coeffs, info) = cholesky_solve(&gram, &rhs)?;
    if info.cond > crate::lincanc::COND_LIMIT || info.min_pivot <= crate::lincanc::PIVOT_MARGIN * eps
    {
        return Err(FitError::Solve(crate::linalg::SolveError::IllConditioned {
            cond: info.cond,
        }));
    }
    Ok(coeffs)
}

/// Evaluate the canceller over `x`, reusing lagged basis functions through a
/// circular buffer so only the newest sample's functions are computed per
/// step. Outputs before one full memory window are invalid.
///
/// The counter receives the weighted-sum cost only (3 multiplications and 5
/// additions per complex MAC plus the combining additions); basis-function
/// multiplications are tracked by [`bf::BfSet::mul_count`] and reported
/// separately.
pub fn apply_poly(m: &PolyModel, x: &[Complex64], ops: &mut OpCounter) -> Reconstruction {
    let l = m.l as usize;
    let basis = bf_indices(m.p_max);
    let mut buffer: BfBuffer<Complex64> = BfBuffer::new(l, m.p_max);
    let mut samples = vec![Complex64::new(0.0, 0.0); x.len()];
    for n in 0..x.len() {
        let fresh = bf_dp(x[n], m.p_max).expect("model order is odd by construction");
        if n + 1 >= l {
            let mut acc: Option<Complex64> = None;
            for idx in &basis {
                for lag in 0..l {
                    let value = if lag == 0 {
                        fresh.get(idx.p, idx.q)
                    } else {
                        buffer.lagged(lag)[bf::flat_index(idx.p, idx.q)]
                    };
                    let term = cmul3_f64(m.coeff(idx.p, idx.q, lag as u32), value, ops);
                    acc = Some(match acc {
                        None => term,
                        Some(a) => {
                            ops.add(2);
                            a + term
                        }
                    });
                }
            }
            samples[n] = acc.expect("basis is never empty");
        }
        buffer.push(fresh.values);
    }
    Reconstruction { samples, valid_from: l - 1 }
}

/// Oracle evaluation path: recompute every lag's basis functions from
/// scratch instead of reusing the buffer. Identical arithmetic per term, so
/// its output must equal [`apply_poly`] exactly.
#[cfg(test)]
pub(crate) fn apply_poly_recompute(m: &PolyModel, x: &[Complex64]) -> Reconstruction {
    let l = m.l as usize;
    let basis = bf_indices(m.p_max);
    let mut ops = OpCounter::new();
    let mut samples = vec![Complex64::new(0.0, 0.0); x.len()];
    for n in (l - 1)..x.len() {
        let sets: Vec<BfSet<Complex64>> =
            (0..l).map(|lag| bf_dp(x[n - lag], m.p_max).unwrap()).collect();
        let mut acc: Option<Complex64> = None;
        for idx in &basis {
            for lag in 0..l {
                let term = cmul3_f64(m.coeff(idx.p, idx.q, lag as u32), sets[lag].get(idx.p, idx.q), &mut ops);
                acc = Some(match acc {
                    None => term,
                    Some(a) => a + term,
                });
            }
        }
        samples[n] = acc.expect("basis is never empty");
    }
    Reconstruction { samples, valid_from: l - 1 }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::PolyModel;
    use crate::signal::c;
    use crate::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_seq(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    }

    pub fn random_model(p_max: u32, l: u32, seed: u64) -> PolyModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = crate::metrics::bf_count(l, p_max) as usize;
        let coeffs = (0..n)
            .map(|_| c(0.2 * (rng.gen::<f64>() - 0.5), 0.2 * (rng.gen::<f64>() - 0.5)))
            .collect();
        PolyModel::new(p_max, l, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::{random_model, random_seq};
    use super::*;
    use crate::lincanc::{apply_linear, fit_linear, LinModel};
    use crate::signal::c;

    #[test]
    fn self_identification_recovers_coefficients() {
        let x = random_seq(4000, 11);
        let truth = random_model(5, 2, 12);
        let mut ops = OpCounter::new();
        let y = apply_poly(&truth, &x, &mut ops);
        let fitted = fit_poly(&x[1..].to_vec(), &y.samples[1..].to_vec(), 5, 2).unwrap();
        let scale: f64 = truth.coeffs().iter().map(|v| v.norm()).sum::<f64>();
        for (got, want) in fitted.coeffs().iter().zip(truth.coeffs()) {
            assert!(
                (got - want).norm() / scale < 1e-6,
                "coefficient error {}",
                (got - want).norm()
            );
        }
    }

    #[test]
    fn order_one_q_one_fit_matches_linear_fit() {
        let x = random_seq(600, 21);
        let taps = vec![c(0.9, -0.2), c(0.15, 0.1)];
        let mut ops = OpCounter::new();
        let y = apply_linear(&LinModel::new(taps), &x, &mut ops);
        let lin = fit_linear(&x, &y.samples, 2).unwrap();
        let restricted =
            fit_poly_with_basis(&x, &y.samples, 1, &[BfIndex { p: 1, q: 1 }], 2).unwrap();
        for (a, b) in restricted.iter().zip(lin.taps()) {
            assert!((a - b).norm() < 1e-9, "difference {}", (a - b).norm());
        }
    }

    #[test]
    fn apply_counts_match_closed_forms() {
        for (l, p) in [(1u32, 1u32), (2, 3), (3, 7), (4, 5)] {
            let m = random_model(p, l, 40 + l as u64);
            let x = random_seq(64 + l as usize, 50 + l as u64);
            let mut ops = OpCounter::new();
            let rec = apply_poly(&m, &x, &mut ops);
            let valid = (x.len() - rec.valid_from) as u64;
            let expect = crate::metrics::complexity(crate::metrics::ComplexitySpec::Poly { l, p })
                .unwrap();
            assert_eq!(ops.real_mul, valid * expect.n_mul, "mults for L={l}, P={p}");
            assert_eq!(ops.real_add, valid * expect.n_add, "adds for L={l}, P={p}");
        }
    }

    #[test]
    fn table_point_counts() {
        let m = random_model(7, 3, 77);
        let x = random_seq(40, 78);
        let mut ops = OpCounter::new();
        let rec = apply_poly(&m, &x, &mut ops);
        let valid = (x.len() - rec.valid_from) as u64;
        assert_eq!(ops.real_add / valid, 418);
        assert_eq!(ops.real_mul / valid, 180);
    }

    #[test]
    fn zero_model_gives_zero_output() {
        let m = PolyModel::zeroed(5, 3);
        let x = random_seq(32, 5);
        let mut ops = OpCounter::new();
        let rec = apply_poly(&m, &x, &mut ops);
        assert!(rec.valid().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn buffered_path_equals_recompute_path_exactly() {
        let m = random_model(7, 3, 91);
        let x = random_seq(200, 92);
        let mut ops = OpCounter::new();
        let buffered = apply_poly(&m, &x, &mut ops);
        let recomputed = apply_poly_recompute(&m, &x);
        assert_eq!(buffered.samples, recomputed.samples);
    }

    #[test]
    fn order_one_q_restricted_model_reproduces_linear_apply_exactly() {
        let taps = vec![c(0.7, 0.3), c(-0.2, 0.05), c(0.03, -0.01)];
        let mut m = PolyModel::zeroed(1, 3);
        for (lag, t) in taps.iter().enumerate() {
            m.set_coeff(1, 1, lag as u32, *t);
        }
        let x = random_seq(128, 61);
        let mut ops_a = OpCounter::new();
        let mut ops_b = OpCounter::new();
        let via_poly = apply_poly(&m, &x, &mut ops_a);
        let via_linear = apply_linear(&LinModel::new(taps), &x, &mut ops_b);
        assert_eq!(via_poly.samples, via_linear.samples);
    }

    #[test]
    fn json_round_trip_is_lossless_and_ordered() {
        let m = random_model(3, 2, 17);
        let s = m.to_json();
        let back = PolyModel::from_json(&s).unwrap();
        assert_eq!(m, back);
        // Lexicographic (p, q, l): the first coefficient entry is (1, 0, 0).
        let wire: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(wire["coeffs"][0]["p"], 1);
        assert_eq!(wire["coeffs"][0]["q"], 0);
        assert_eq!(wire["coeffs"][0]["l"], 0);
    }

    #[test]
    fn collinear_regressors_are_rejected_with_condition_estimate() {
        // A constant input makes every basis-function column constant, so
        // the Gram matrix is rank one.
        let x = vec![c(0.5, 0.25); 400];
        let y = random_seq(400, 3);
        match fit_poly(&x, &y, 3, 2) {
            Err(FitError::Solve(crate::linalg::SolveError::IllConditioned { cond })) => {
                assert!(cond > 1e6, "condition estimate {cond}");
            }
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_samples_is_rejected() {
        let x = random_seq(100, 1);
        assert!(matches!(
            fit_poly(&x, &x, 7, 3),
            Err(FitError::TooFewSamples { need: 240, .. })
        ));
    }
}
