//! Synthetic full-duplex transceiver.
//!
//! Generates training and evaluation datasets with known ground truth in
//! place of a physical testbed: a QPSK-OFDM transmit waveform runs through
//! an IQ-imbalanced mixer, a memory-polynomial power amplifier and a linear
//! leakage channel, then receives additive white Gaussian noise. All
//! generators are pure functions of `(config, seed)`; per-symbol and noise
//! random streams are split from the master seed by counter, so parallel
//! generation stays reproducible.

pub mod file;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lincanc;
use crate::signal::{mean_power, ComplexSeq, SignalError};
use crate::Complex64;

/// Stream id used to split the noise generator off the master seed.
const NOISE_STREAM: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum SigError {
    #[error("carrier count must be a power of two >= 2, got {0}")]
    BadCarriers(usize),
    #[error("oversampling factor must be >= 1")]
    BadOversample,
    #[error("symbol count must be >= 1")]
    BadSymbols,
    #[error("dataset needs at least {min} samples, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("transmit chain needs a nonzero first-order tap at lag 0")]
    MissingLinearTerm,
    #[error("leakage channel must have at least one tap")]
    EmptyChannel,
    #[error("power-amplifier order must be odd, got {0}")]
    EvenPaOrder(u32),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("linear reference fit failed: {0}")]
    NormFit(#[from] lincanc::FitError),
}

/// OFDM waveform parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OfdmParams {
    pub n_carriers: usize,
    pub oversample: usize,
    pub sample_rate_hz: f64,
}

/// One memory tap of the power-amplifier polynomial: the coefficient of
/// `x[n-l] |x[n-l]|^(p-1)` for odd order `p`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PaTerm {
    pub p: u32,
    pub l: u32,
    pub re: f64,
    pub im: f64,
}

impl PaTerm {
    pub fn coeff(&self) -> Complex64 {
        Complex::new(self.re, self.im)
    }
}

/// Full transmit-chain description: IQ imbalance, PA polynomial, leakage
/// channel, noise level and the master seed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TxChainConfig {
    /// Relative gain mismatch of the mixer (linear, 0 = balanced).
    pub iq_gain_mismatch: f64,
    /// Phase mismatch of the mixer in radians.
    pub iq_phase_mismatch: f64,
    /// Memory-polynomial PA terms; must contain a nonzero `(p=1, l=0)` term.
    pub pa_terms: Vec<PaTerm>,
    /// Leakage (self-interference) channel taps as `[re, im]` pairs.
    pub si_channel: Vec<[f64; 2]>,
    /// Signal-to-noise ratio of the received leakage in dB
    /// (`inf` disables noise).
    pub snr_db: f64,
    pub seed: u64,
    pub ofdm: OfdmParams,
}

impl TxChainConfig {
    pub fn validate(&self) -> Result<(), SigError> {
        if self.si_channel.is_empty() {
            return Err(SigError::EmptyChannel);
        }
        if let Some(t) = self.pa_terms.iter().find(|t| t.p % 2 == 0) {
            return Err(SigError::EvenPaOrder(t.p));
        }
        let has_linear = self
            .pa_terms
            .iter()
            .any(|t| t.p == 1 && t.l == 0 && (t.re != 0.0 || t.im != 0.0));
        if !has_linear {
            return Err(SigError::MissingLinearTerm);
        }
        Ok(())
    }

    pub fn si_taps(&self) -> Vec<Complex64> {
        self.si_channel.iter().map(|t| Complex::new(t[0], t[1])).collect()
    }

    /// Memory length of the composite linear path (PA memory convolved with
    /// the leakage channel).
    pub fn linear_support(&self) -> usize {
        let pa_mem = self.pa_terms.iter().map(|t| t.l as usize).max().unwrap_or(0);
        pa_mem + self.si_channel.len()
    }

    /// Direct and image mixer coefficients: `x_iq = mu*x + nu*conj(x)` with
    /// `mu = 1 + g` and `nu = (1 + g) - exp(j*phi)`, zero image when
    /// balanced.
    pub fn iq_coeffs(&self) -> (Complex64, Complex64) {
        let mu = Complex::new(1.0 + self.iq_gain_mismatch, 0.0);
        let nu = mu - Complex::new(self.iq_phase_mismatch.cos(), self.iq_phase_mismatch.sin());
        (mu, nu)
    }
}

/// Normalization statistics estimated on the training split. Variances are
/// total complex variances; dividing by their square root leaves the real
/// and imaginary parts at roughly 0.5 each for circular signals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct NormStats {
    pub x_mean: [f64; 2],
    pub x_var: f64,
    pub nl_mean: [f64; 2],
    pub nl_var: f64,
}

impl NormStats {
    pub fn x_mean_c(&self) -> Complex64 {
        Complex::new(self.x_mean[0], self.x_mean[1])
    }

    pub fn nl_mean_c(&self) -> Complex64 {
        Complex::new(self.nl_mean[0], self.nl_mean[1])
    }
}

/// A generated dataset: transmit samples `x`, received samples `y`, an
/// optional noiseless copy of the received leakage, the train/test split
/// index and the training-split normalization statistics.
///
/// Evaluation on the test split deliberately reuses the training-split
/// statistics; test data never informs normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: ComplexSeq,
    pub y: ComplexSeq,
    pub y_clean: Option<ComplexSeq>,
    pub split_index: usize,
    pub norm: NormStats,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_train(&self) -> &[Complex64] {
        &self.x.samples()[..self.split_index]
    }

    pub fn y_train(&self) -> &[Complex64] {
        &self.y.samples()[..self.split_index]
    }

    pub fn x_test(&self) -> &[Complex64] {
        &self.x.samples()[self.split_index..]
    }

    pub fn y_test(&self) -> &[Complex64] {
        &self.y.samples()[self.split_index..]
    }

    /// Normalize a transmit sample with the training-split statistics.
    pub fn normalize_x(&self, v: Complex64) -> Complex64 {
        (v - self.norm.x_mean_c()) / self.norm.x_var.sqrt()
    }
}

/// Generate `n_symbols` of a QPSK-modulated OFDM waveform with unit average
/// power. All `n_carriers` carriers carry data; oversampling zero-pads the
/// spectrum so the occupied band is `1/oversample` of the output rate.
/// Deterministic for a fixed seed; symbol `k` draws from stream `k` of the
/// seeded generator, so symbols could be produced in parallel without
/// changing the waveform.
pub fn gen_ofdm_qpsk(
    n_carriers: usize,
    n_symbols: usize,
    oversample: usize,
    seed: u64,
) -> Result<ComplexSeq, SigError> {
    if n_carriers < 2 || !n_carriers.is_power_of_two() {
        return Err(SigError::BadCarriers(n_carriers));
    }
    if oversample < 1 {
        return Err(SigError::BadOversample);
    }
    if n_symbols < 1 {
        return Err(SigError::BadSymbols);
    }
    let nfft = n_carriers * oversample;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(nfft);
    let amp = 1.0 / (n_carriers as f64).sqrt();
    let quad = std::f64::consts::FRAC_1_SQRT_2;

    let mut out = Vec::with_capacity(n_symbols * nfft);
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for sym in 0..n_symbols {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sym as u64);
        buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
        // Carriers occupy the band around DC; the rest of the spectrum is
        // zero padding.
        let half = n_carriers / 2;
        for c in 0..n_carriers {
            let offset = c as i64 - half as i64;
            let bin = offset.rem_euclid(nfft as i64) as usize;
            let re = if rng.gen::<bool>() { quad } else { -quad };
            let im = if rng.gen::<bool>() { quad } else { -quad };
            buf[bin] = Complex::new(re * amp, im * amp);
        }
        ifft.process(&mut buf);
        out.extend_from_slice(&buf);
    }
    Ok(ComplexSeq::new(out, 1.0)?)
}

/// Noisy and noiseless outputs of the transmit chain.
#[derive(Debug, Clone)]
pub struct TxChainOutput {
    pub noisy: ComplexSeq,
    pub clean: ComplexSeq,
}

/// Pass `x` through the mixer, PA and leakage channel, then add white noise
/// at the configured SNR. When the clean leakage power is zero the noise
/// level falls back to `10^(-snr/10)` relative to unit power, so a null
/// signal path still yields a pure noise sequence.
pub fn apply_tx_chain(x: &ComplexSeq, cfg: &TxChainConfig) -> Result<TxChainOutput, SigError> {
    cfg.validate()?;
    let samples = x.samples();
    let (mu, nu) = cfg.iq_coeffs();
    let balanced = cfg.iq_gain_mismatch == 0.0 && cfg.iq_phase_mismatch == 0.0;
    let x_iq: Vec<Complex64> = if balanced {
        samples.to_vec()
    } else {
        samples.iter().map(|&v| mu * v + nu * v.conj()).collect()
    };

    // Memory-polynomial PA.
    let mut pa = vec![Complex::new(0.0, 0.0); samples.len()];
    for term in &cfg.pa_terms {
        let lag = term.l as usize;
        let coeff = term.coeff();
        if coeff == Complex::new(0.0, 0.0) {
            continue;
        }
        for n in lag..samples.len() {
            let v = x_iq[n - lag];
            let env = v.norm_sqr().powi((term.p as i32 - 1) / 2);
            pa[n] += coeff * v * env;
        }
    }

    // Leakage channel.
    let taps = cfg.si_taps();
    let clean: Vec<Complex64> = if taps.len() == 1 && taps[0] == Complex::new(1.0, 0.0) {
        pa
    } else {
        let mut y = vec![Complex::new(0.0, 0.0); samples.len()];
        for (k, tap) in taps.iter().enumerate() {
            if *tap == Complex::new(0.0, 0.0) {
                continue;
            }
            for n in k..samples.len() {
                y[n] += tap * pa[n - k];
            }
        }
        y
    };

    let noisy = if cfg.snr_db.is_finite() {
        let p_clean = mean_power(&clean);
        let reference = if p_clean > 0.0 { p_clean } else { 1.0 };
        let sigma2 = reference * (10.0f64).powf(-cfg.snr_db / 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(NOISE_STREAM);
        let scale = (sigma2 / 2.0).sqrt();
        clean
            .iter()
            .map(|&v| {
                let (n1, n2) = gaussian_pair(&mut rng);
                v + Complex::new(scale * n1, scale * n2)
            })
            .collect()
    } else {
        clean.clone()
    };

    let rate = x.sample_rate_hz();
    Ok(TxChainOutput {
        noisy: ComplexSeq::new(noisy, rate)?,
        clean: ComplexSeq::new(clean, rate)?,
    })
}

/// Box-Muller pair of independent standard normal values.
fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    (r * th.cos(), r * th.sin())
}

fn mean_of(v: &[Complex64]) -> Complex64 {
    v.iter().sum::<Complex64>() / v.len() as f64
}

fn variance_about(v: &[Complex64], mean: Complex64) -> f64 {
    v.iter().map(|s| (s - mean).norm_sqr()).sum::<f64>() / v.len() as f64
}

/// Generate a complete dataset of `n_samples` (>= 512): the transmit
/// waveform, the received leakage with and without noise, a 90/10
/// train/test split and normalization statistics computed on the training
/// split only.
///
/// The non-linear-residual statistics come from the residual of a linear
/// least-squares fit whose memory covers the chain's composite linear
/// support.
pub fn make_dataset(cfg: &TxChainConfig, n_samples: usize) -> Result<Dataset, SigError> {
    if n_samples < 512 {
        return Err(SigError::TooShort { min: 512, got: n_samples });
    }
    cfg.validate()?;
    let sym_len = cfg.ofdm.n_carriers * cfg.ofdm.oversample;
    let n_symbols = n_samples.div_ceil(sym_len);
    let x = gen_ofdm_qpsk(cfg.ofdm.n_carriers, n_symbols, cfg.ofdm.oversample, cfg.seed)?
        .truncated(n_samples)
        .with_sample_rate(cfg.ofdm.sample_rate_hz)?;
    let chain = apply_tx_chain(&x, cfg)?;

    let split_index = (n_samples as f64 * 0.9).floor() as usize;
    let x_tr = &x.samples()[..split_index];
    let y_tr = &chain.noisy.samples()[..split_index];

    let x_mean = mean_of(x_tr);
    let x_var = variance_about(x_tr, x_mean);

    let l_norm = cfg.linear_support().max(1);
    let lin = lincanc::fit_linear(x_tr, y_tr, l_norm)?;
    let mut ops = crate::opcount::OpCounter::new();
    let lin_hat = lincanc::apply_linear(&lin, x_tr, &mut ops);
    let residual: Vec<Complex64> = y_tr[lin_hat.valid_from..]
        .iter()
        .zip(lin_hat.valid())
        .map(|(y, h)| y - h)
        .collect();
    let nl_mean = mean_of(&residual);
    let nl_var = variance_about(&residual, nl_mean);

    Ok(Dataset {
        x,
        y: chain.noisy,
        y_clean: Some(chain.clean),
        split_index,
        norm: NormStats {
            x_mean: [x_mean.re, x_mean.im],
            x_var,
            nl_mean: [nl_mean.re, nl_mean.im],
            nl_var,
        },
    })
}
