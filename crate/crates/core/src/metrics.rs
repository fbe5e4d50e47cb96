//! Cancellation-ratio, spectral and complexity metrics.

use rustfft::FftPlanner;
use thiserror::Error;

use crate::signal::ComplexSeq;
use crate::Complex64;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reference signal is all zero")]
    ZeroReference,
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("nfft must be a power of two, got {0}")]
    BadNfft(usize),
    #[error("signal shorter than one segment ({len} < {nfft})")]
    TooShort { len: usize, nfft: usize },
    #[error("overlap must be in [0, 0.95], got {0}")]
    BadOverlap(f64),
    #[error("invalid complexity parameters: {0}")]
    BadParams(String),
}

/// Cancellation ratio in dB: received self-interference power over residual
/// power after subtracting the reconstruction. Returns `f64::INFINITY` when
/// the residual is exactly zero.
///
/// ```
/// use sic_core::{metrics::c_db, Complex64};
///
/// let y = vec![Complex64::new(2.0, 0.0); 8];
/// let half: Vec<Complex64> = y.iter().map(|v| v / 2.0).collect();
/// // Residual power is a quarter of the original: ~6.02 dB.
/// assert!((c_db(&y, &half).unwrap() - 10.0 * 4.0f64.log10()).abs() < 1e-12);
/// ```
pub fn c_db(y_si: &[Complex64], y_hat: &[Complex64]) -> Result<f64, MetricsError> {
    if y_si.len() != y_hat.len() {
        return Err(MetricsError::LengthMismatch(y_si.len(), y_hat.len()));
    }
    if y_si.is_empty() {
        return Err(MetricsError::Empty);
    }
    let p_si: f64 = y_si.iter().map(|v| v.norm_sqr()).sum();
    if p_si == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    let p_res: f64 = y_si.iter().zip(y_hat).map(|(a, b)| (a - b).norm_sqr()).sum();
    if p_res == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (p_si / p_res).log10())
}

/// Welch power spectral density estimate.
#[derive(Debug, Clone)]
pub struct PsdEstimate {
    /// Frequency of each bin in Hz, ascending from -fs/2.
    pub freq_hz: Vec<f64>,
    /// Per-bin power, normalized so the sum over bins equals the mean
    /// time-domain power. Linear scale.
    pub power: Vec<f64>,
}

impl PsdEstimate {
    /// Per-bin power in dB (`-inf` for empty bins).
    pub fn power_db(&self) -> Vec<f64> {
        self.power
            .iter()
            .map(|&p| if p > 0.0 { 10.0 * p.log10() } else { f64::NEG_INFINITY })
            .collect()
    }

    /// Total integrated power across all bins.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// CSV rows of `freq_hz,psd_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,psd_db\n");
        for (f, p) in self.freq_hz.iter().zip(self.power_db()) {
            out.push_str(&format!("{f},{p}\n"));
        }
        out
    }
}

/// Welch PSD with a Hann window and the given overlap fraction (0.5 is the
/// usual choice). Bins are returned centered around DC.
pub fn psd(x: &ComplexSeq, nfft: usize, overlap: f64) -> Result<PsdEstimate, MetricsError> {
    if nfft == 0 || !nfft.is_power_of_two() {
        return Err(MetricsError::BadNfft(nfft));
    }
    if x.len() < nfft {
        return Err(MetricsError::TooShort { len: x.len(), nfft });
    }
    if !(0.0..=0.95).contains(&overlap) {
        return Err(MetricsError::BadOverlap(overlap));
    }

    let window: Vec<f64> = (0..nfft)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / nfft as f64).cos()))
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum::<f64>() / nfft as f64;
    let hop = ((nfft as f64) * (1.0 - overlap)).round().max(1.0) as usize;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nfft);

    let samples = x.samples();
    let mut acc = vec![0.0f64; nfft];
    let mut segments = 0usize;
    let mut start = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    while start + nfft <= samples.len() {
        for (b, (s, w)) in buf.iter_mut().zip(samples[start..start + nfft].iter().zip(&window)) {
            *b = s * w;
        }
        fft.process(&mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
        segments += 1;
        start += hop;
    }

    let scale = 1.0 / (segments as f64 * nfft as f64 * nfft as f64 * window_power);
    // fftshift so bins run from -fs/2 to +fs/2.
    let half = nfft / 2;
    let mut power = vec![0.0f64; nfft];
    for k in 0..nfft {
        let shifted = (k + half) % nfft;
        power[shifted] = acc[k] * scale;
    }
    let fs = x.sample_rate_hz();
    let freq_hz = (0..nfft)
        .map(|k| (k as f64 - half as f64) * fs / nfft as f64)
        .collect();
    Ok(PsdEstimate { freq_hz, power })
}

/// Per-sample operation counts for a canceller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ComplexityReport {
    pub n_add: u64,
    pub n_mul: u64,
    /// Number of distinct basis functions (polynomial canceller only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bf: Option<u64>,
    /// Multiplications to produce one sample's fresh basis functions
    /// (polynomial canceller only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_mul_bf: Option<u64>,
}

/// Canceller families with the parameters of their closed-form costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexitySpec {
    /// FIR canceller with `l` taps.
    Linear { l: u32 },
    /// Parallel-Hammerstein canceller with memory `l` and maximum odd order `p`
    /// (the linear term is part of its basis set).
    Poly { l: u32, p: u32 },
    /// Hybrid canceller: `n_l` hidden layers of `n_h` ReLU neurons over a
    /// `2l`-input window, plus the parallel `l`-tap linear canceller and the
    /// two adds that combine the two branches.
    Nn { l: u32, n_l: u32, n_h: u32 },
}

/// Number of distinct basis functions of a parallel-Hammerstein model:
/// `L/4 * (P+1) * (P+3)`.
pub fn bf_count(l: u32, p: u32) -> u64 {
    l as u64 * (p as u64 + 1) * (p as u64 + 3) / 4
}

/// Multiplications needed per sample by the dynamic-programming
/// basis-function computation: `(P+1)(P+3)/8 - 1`.
pub fn bf_mul_count(p: u32) -> u64 {
    (p as u64 + 1) * (p as u64 + 3) / 8 - 1
}

/// Evaluate the closed-form per-sample operation counts. Complex products are
/// costed with the three-multiplier decomposition and ReLU counts as one
/// addition.
///
/// The counts cover the canceller datapath only: the weighted sums, the
/// activations, the parallel linear stage and the two combining additions of
/// the hybrid canceller. Input normalization and output denormalization are
/// excluded (denormalization is a shift in hardware), as is the polynomial
/// canceller's basis-function computation, which is reported separately in
/// `n_mul_bf`. Accountings that fold such overheads in will sit slightly
/// above these values.
pub fn complexity(spec: ComplexitySpec) -> Result<ComplexityReport, MetricsError> {
    match spec {
        ComplexitySpec::Linear { l } => {
            if l == 0 {
                return Err(MetricsError::BadParams("linear canceller needs l >= 1".into()));
            }
            let l = l as u64;
            Ok(ComplexityReport { n_add: 7 * l - 2, n_mul: 3 * l, n_bf: None, n_mul_bf: None })
        }
        ComplexitySpec::Poly { l, p } => {
            if l == 0 {
                return Err(MetricsError::BadParams("polynomial canceller needs l >= 1".into()));
            }
            if p == 0 || p % 2 == 0 {
                return Err(MetricsError::BadParams(format!(
                    "polynomial order must be odd and positive, got {p}"
                )));
            }
            let n_bf = bf_count(l, p);
            Ok(ComplexityReport {
                n_add: 7 * n_bf - 2,
                n_mul: 3 * n_bf,
                n_bf: Some(n_bf),
                n_mul_bf: Some(bf_mul_count(p)),
            })
        }
        ComplexitySpec::Nn { l, n_l, n_h } => {
            if l == 0 || n_l == 0 || n_h == 0 {
                return Err(MetricsError::BadParams(
                    "network dimensions must be positive".into(),
                ));
            }
            let (l, n_l, n_h) = (l as u64, n_l as u64, n_h as u64);
            Ok(ComplexityReport {
                n_add: (2 * l + 3 + (n_l - 1) * (n_h + 1)) * n_h + 7 * l,
                n_mul: (2 * l + 2 + (n_l - 1) * n_h) * n_h + 3 * l,
                n_bf: None,
                n_mul_bf: None,
            })
        }
    }
}
