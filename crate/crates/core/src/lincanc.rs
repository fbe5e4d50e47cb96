//! Linear self-interference canceller.
//!
//! Models the leakage channel as an `L`-tap complex FIR filter on the
//! transmitted baseband samples and identifies the taps in one shot with
//! regularized least squares.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cholesky_solve, Hermitian, SolveError};
use crate::opcount::OpCounter;
use crate::signal::Reconstruction;
use crate::Complex64;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("input and output must have equal length (got {0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} samples to fit {params} parameters, got {got}")]
    TooFewSamples { need: usize, got: usize, params: usize },
    #[error("memory length must be at least 1")]
    ZeroMemory,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Pivot-ratio ceiling above which a fit is reported as rank deficient.
pub(crate) const COND_LIMIT: f64 = 1e12;

/// A Cholesky pivot this close to the diagonal regularizer means the data
/// did not determine that direction at all.
pub(crate) const PIVOT_MARGIN: f64 = 4.0;

/// Estimated FIR channel taps.
#[derive(Debug, Clone, PartialEq)]
pub struct LinModel {
    taps: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct LinModelWire {
    #[serde(rename = "L")]
    l: usize,
    taps: Vec<[f64; 2]>,
}

impl LinModel {
    pub fn new(taps: Vec<Complex64>) -> Self {
        assert!(!taps.is_empty(), "a linear model needs at least one tap");
        assert!(taps.iter().all(|t| t.re.is_finite() && t.im.is_finite()));
        Self { taps }
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn memory_len(&self) -> usize {
        self.taps.len()
    }

    pub fn to_json(&self) -> String {
        let wire = LinModelWire {
            l: self.taps.len(),
            taps: self.taps.iter().map(|t| [t.re, t.im]).collect(),
        };
        serde_json::to_string_pretty(&wire).expect("serializing a linear model cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let wire: LinModelWire = serde_json::from_str(s)?;
        Ok(Self::new(wire.taps.iter().map(|t| Complex64::new(t[0], t[1])).collect()))
    }
}

/// Least-squares estimate of `l` FIR taps from transmit samples `x` and
/// received samples `y`, solved through the normal equations with a small
/// diagonal regularizer (1e-9).
pub fn fit_linear(x: &[Complex64], y: &[Complex64], l: usize) -> Result<LinModel, FitError> {
    if l == 0 {
        return Err(FitError::ZeroMemory);
    }
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 4 * l {
        return Err(FitError::TooFewSamples { need: 4 * l, got: x.len(), params: l });
    }

    let mut gram = Hermitian::zeros(l);
    let mut rhs = vec![Complex64::new(0.0, 0.0); l];
    for n in (l - 1)..x.len() {
        // Regressor r[k] = x[n-k].
        for i in 0..l {
            let xi = x[n - i].conj();
            rhs[i] += xi * y[n];
            for j in i..l {
                *gram.at_mut(i, j) += xi * x[n - j];
            }
        }
    }
    for i in 0..l {
        for j in 0..i {
            *gram.at_mut(i, j) = gram.at(j, i).conj();
        }
    }
    let scale = gram.trace() / l as f64;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(FitError::Solve(SolveError::IllConditioned { cond: f64::INFINITY }));
    }
    let eps = 1e-9;
    gram.regularize(eps);
    let (taps, info) = cholesky_solve(&gram, &rhs)?;
    if info.cond > COND_LIMIT || info.min_pivot <= PIVOT_MARGIN * eps {
        return Err(FitError::Solve(SolveError::IllConditioned { cond: info.cond }));
    }
    Ok(LinModel::new(taps))
}

/// FIR reconstruction of the linear self-interference component. Outputs for
/// the first `L-1` samples have no full history and are marked invalid.
///
/// The evaluation uses the three-multiplier complex product and a fixed
/// ascending-lag accumulation order; the counter receives 3L multiplications
/// and 7L-2 additions per valid output sample.
pub fn apply_linear(m: &LinModel, x: &[Complex64], ops: &mut OpCounter) -> Reconstruction {
    let l = m.taps.len();
    let mut samples = vec![Complex64::new(0.0, 0.0); x.len()];
    for n in (l.saturating_sub(1))..x.len() {
        let mut acc = cmul3_f64(m.taps[0], x[n], ops);
        for lag in 1..l {
            let term = cmul3_f64(m.taps[lag], x[n - lag], ops);
            acc += term;
            ops.add(2);
        }
        samples[n] = acc;
    }
    Reconstruction { samples, valid_from: l - 1 }
}

/// Fixed-point FIR evaluation: taps and input samples quantized into `fmt`,
/// one complex MAC per tap assigned round-robin over `n_cpe` units,
/// ascending-lag accumulation per unit and a pairwise tree across units,
/// the same value order as the hardware's linear canceller.
pub fn apply_linear_fxp(
    m: &LinModel,
    x: &[Complex64],
    fmt: crate::fxp::FxpFormat,
    n_cpe: usize,
    ops: &mut OpCounter,
) -> Result<crate::fxp::FxpReconstruction, crate::fxp::FxpError> {
    use crate::fxp::{cadd, cmul3, fxp_tree_sum_complex, quantize_complex, FxpComplex};
    let l = m.taps.len();
    let n_cpe = n_cpe.clamp(1, l);
    let taps: Vec<FxpComplex> = m.taps.iter().map(|t| quantize_complex(*t, fmt)).collect();
    let mut samples = vec![FxpComplex::zero(fmt); x.len()];
    for n in (l - 1)..x.len() {
        let mut partials: Vec<Option<FxpComplex>> = vec![None; n_cpe];
        for (lag, tap) in taps.iter().enumerate() {
            let xin = quantize_complex(x[n - lag], fmt);
            let prod = cmul3(*tap, xin, ops)?;
            let slot = lag % n_cpe;
            partials[slot] = Some(match partials[slot] {
                None => prod,
                Some(a) => cadd(a, prod, ops)?,
            });
        }
        let lanes: Vec<FxpComplex> =
            partials.into_iter().map(|p| p.unwrap_or(FxpComplex::zero(fmt))).collect();
        samples[n] = fxp_tree_sum_complex(&lanes, ops)?;
    }
    Ok(crate::fxp::FxpReconstruction { samples, valid_from: l - 1 })
}

/// Complex product via three real multiplications and five real additions,
/// the costing convention shared by all cancellers.
#[inline]
pub fn cmul3_f64(a: Complex64, b: Complex64, ops: &mut OpCounter) -> Complex64 {
    let s1 = a.re * b.re;
    let s2 = a.im * b.im;
    let s3 = (a.re + a.im) * (b.re + b.im);
    ops.mul(3);
    ops.add(5);
    Complex64::new(s1 - s2, s3 - s1 - s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::c;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect()
    }

    fn fir(taps: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        let l = taps.len();
        let mut y = vec![c(0.0, 0.0); x.len()];
        for n in 0..x.len() {
            for (lag, t) in taps.iter().enumerate() {
                if n >= lag {
                    y[n] += t * x[n - lag];
                }
            }
        }
        let _ = l;
        y
    }

    #[test]
    fn recovers_two_tap_channel_exactly() {
        let x = random_seq(512, 7);
        let taps = vec![c(0.8, -0.3), c(-0.2, 0.45)];
        let y = fir(&taps, &x);
        let m = fit_linear(&x, &y, 2).unwrap();
        for (got, want) in m.taps().iter().zip(&taps) {
            assert!((got - want).norm() < 1e-8, "tap error {}", (got - want).norm());
        }
    }

    #[test]
    fn identity_channel_gives_unit_first_tap() {
        let x = random_seq(256, 9);
        let m = fit_linear(&x, &x, 3).unwrap();
        assert!((m.taps()[0] - c(1.0, 0.0)).norm() < 1e-7);
        assert!(m.taps()[1].norm() < 1e-7);
        assert!(m.taps()[2].norm() < 1e-7);
    }

    #[test]
    fn apply_identity_and_delay() {
        let x = random_seq(64, 3);
        let mut ops = OpCounter::new();
        let ident = apply_linear(&LinModel::new(vec![c(1.0, 0.0)]), &x, &mut ops);
        assert_eq!(ident.valid_from, 0);
        for (a, b) in ident.samples.iter().zip(&x) {
            assert!((a - b).norm() < 1e-15);
        }
        let delay = apply_linear(&LinModel::new(vec![c(0.0, 0.0), c(1.0, 0.0)]), &x, &mut ops);
        assert_eq!(delay.valid_from, 1);
        for n in 1..x.len() {
            assert!((delay.samples[n] - x[n - 1]).norm() < 1e-15);
        }
    }

    #[test]
    fn per_sample_operation_counts() {
        for l in 1..=6usize {
            let x = random_seq(100, l as u64);
            let m = LinModel::new(random_seq(l, 99));
            let mut ops = OpCounter::new();
            let rec = apply_linear(&m, &x, &mut ops);
            let valid = (x.len() - rec.valid_from) as u64;
            assert_eq!(ops.real_mul, valid * 3 * l as u64);
            assert_eq!(ops.real_add, valid * (7 * l as u64 - 2));
        }
    }

    #[test]
    fn apply_is_linear_in_its_input() {
        let m = LinModel::new(vec![c(0.5, 0.2), c(-0.3, 0.1), c(0.05, -0.07)]);
        let x1 = random_seq(128, 21);
        let x2 = random_seq(128, 22);
        let (alpha, beta) = (c(1.3, -0.4), c(-0.7, 0.2));
        let combo: Vec<Complex64> =
            x1.iter().zip(&x2).map(|(a, b)| alpha * a + beta * b).collect();
        let mut ops = OpCounter::new();
        let lhs = apply_linear(&m, &combo, &mut ops);
        let r1 = apply_linear(&m, &x1, &mut ops);
        let r2 = apply_linear(&m, &x2, &mut ops);
        for n in lhs.valid_from..combo.len() {
            let rhs = alpha * r1.samples[n] + beta * r2.samples[n];
            assert!((lhs.samples[n] - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn identification_is_idempotent_on_noiseless_output() {
        let x = random_seq(400, 31);
        let taps = vec![c(0.9, 0.1), c(-0.25, 0.3), c(0.06, -0.02)];
        let y = fir(&taps, &x);
        let m1 = fit_linear(&x, &y, 3).unwrap();
        let mut ops = OpCounter::new();
        let y2 = apply_linear(&m1, &x, &mut ops);
        let m2 = fit_linear(&x, &y2.samples, 3).unwrap();
        for (a, b) in m1.taps().iter().zip(m2.taps()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let x = vec![c(0.0, 0.0); 64];
        let y = vec![c(1.0, 0.0); 64];
        match fit_linear(&x, &y, 2) {
            Err(FitError::Solve(SolveError::IllConditioned { .. })) => {}
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let m = LinModel::new(vec![c(0.5, -0.125), c(0.0, 1.0)]);
        let s = m.to_json();
        assert!(s.contains("\"L\": 2"));
        let back = LinModel::from_json(&s).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn too_few_samples_is_rejected() {
        let x = random_seq(7, 1);
        assert!(matches!(
            fit_linear(&x, &x, 2),
            Err(FitError::TooFewSamples { need: 8, .. })
        ));
    }

    #[test]
    fn fxp_fir_tracks_float_at_high_precision() {
        let m = LinModel::new(vec![c(0.8, -0.1), c(-0.2, 0.3), c(0.05, 0.02)]);
        let x = random_seq(64, 77);
        let fmt = crate::fxp::FxpFormat::new(24, 20).unwrap();
        let mut ops = OpCounter::new();
        let fx = apply_linear_fxp(&m, &x, fmt, 1, &mut ops).unwrap();
        let mut fops = OpCounter::new();
        let fl = apply_linear(&m, &x, &mut fops);
        for n in fx.valid_from..x.len() {
            assert!((fx.samples[n].to_complex64() - fl.samples[n]).norm() < 1e-4);
        }
        // Same counted cost as the float path.
        assert_eq!(ops.real_mul, fops.real_mul);
        assert_eq!(ops.real_add, fops.real_add);
    }
}
