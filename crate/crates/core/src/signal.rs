//! Baseband sample sequences and canceller outputs.

use num_complex::Complex;
use thiserror::Error;

use crate::Complex64;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sequence must contain at least one sample")]
    Empty,
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("sample rate must be positive, got {0}")]
    BadSampleRate(f64),
}

/// Complex baseband sample sequence with sample-rate metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeq {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
}

impl ComplexSeq {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self, SignalError> {
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        if !(sample_rate_hz > 0.0) {
            return Err(SignalError::BadSampleRate(sample_rate_hz));
        }
        if let Some(index) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(SignalError::NonFinite { index });
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: len >= 1
    }

    /// Mean power of the sequence.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    /// Peak-to-average power ratio in dB.
    pub fn papr_db(&self) -> f64 {
        let avg = self.power();
        let peak = self
            .samples
            .iter()
            .map(|s| s.norm_sqr())
            .fold(0.0f64, f64::max);
        10.0 * (peak / avg).log10()
    }

    /// Return the same samples with a different sample-rate tag.
    pub fn with_sample_rate(mut self, sample_rate_hz: f64) -> Result<Self, SignalError> {
        if !(sample_rate_hz > 0.0) {
            return Err(SignalError::BadSampleRate(sample_rate_hz));
        }
        self.sample_rate_hz = sample_rate_hz;
        Ok(self)
    }

    /// Truncate to the first `n` samples (`n >= 1`).
    pub fn truncated(mut self, n: usize) -> Self {
        assert!(n >= 1, "cannot truncate to an empty sequence");
        self.samples.truncate(n);
        self
    }
}

/// Mean power of a sample slice (0 for an empty slice).
pub fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Canceller output aligned with its input sequence.
///
/// FIR-style cancellers need a full history window before their output is
/// meaningful; the first `valid_from` entries are warm-up and must not enter
/// any cancellation-ratio computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub samples: Vec<Complex64>,
    pub valid_from: usize,
}

impl Reconstruction {
    pub fn valid(&self) -> &[Complex64] {
        &self.samples[self.valid_from..]
    }

    /// Valid samples starting from a caller-supplied warm-up index, used to
    /// align cancellers with different memory lengths on a shared support.
    pub fn valid_from(&self, from: usize) -> &[Complex64] {
        assert!(from >= self.valid_from, "requested range includes warm-up samples");
        &self.samples[from..]
    }
}

/// Convenience constructor for complex values in tests and builders.
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex::new(re, im)
}
