//! Saturating fixed-point arithmetic.
//!
//! Both hardware architectures share one datapath convention: weights,
//! parameters and partial sums are signed two's-complement values of a common
//! bit-width `Q`, and every overflow saturates instead of wrapping. This
//! module reproduces those semantics exactly so that the functional
//! evaluators and the cycle simulators can be compared bit for bit.
//!
//! Conventions:
//!
//! * Rounding is round-to-nearest with ties to even, both when quantizing a
//!   real number and when rescaling a double-width product. Ties-to-even
//!   keeps long MAC chains free of systematic bias.
//! * Products are formed in double-width integers and quantized back to the
//!   operand format once, like a hardware multiplier feeding a `Q`-bit
//!   register.
//! * Additions saturate in the operand format. Saturating addition is not
//!   associative, so every reduction in this crate fixes its order
//!   explicitly; [`fxp_sum`] is the left-to-right reference reduction.
//!
//! # Example
//!
//! ```
//! use sic_core::fxp::{quantize, fxp_add, FxpFormat};
//!
//! let fmt = FxpFormat::new(8, 6).unwrap(); // 8 bits, 6 fractional
//! let a = quantize(0.25, fmt);
//! let b = quantize(0.5, fmt);
//! assert_eq!(fxp_add(a, b).unwrap().to_f64(), 0.75);
//!
//! // Out-of-range values clip to the format maximum and set the flag.
//! let big = quantize(100.0, fmt);
//! assert_eq!(big.to_f64(), 1.984375);
//! assert!(big.saturated());
//! ```

use thiserror::Error;

use crate::opcount::OpCounter;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FxpError {
    #[error("total bits must be in 2..=32, got {0}")]
    BadTotalBits(u32),
    #[error("fraction bits must satisfy 0 <= frac < total, got frac {frac} for total {total}")]
    BadFracBits { total: u32, frac: u32 },
    #[error("format mismatch: {0} vs {1}")]
    FormatMismatch(FxpFormat, FxpFormat),
    #[error("raw value {raw} does not fit in {0} bits", .fmt.total_bits())]
    RawOutOfRange { raw: i64, fmt: FxpFormat },
}

/// Signed fixed-point number format: `total_bits` two's-complement bits of
/// which `frac_bits` are fractional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct FxpFormat {
    total_bits: u8,
    frac_bits: u8,
}

impl std::fmt::Display for FxpFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Q{}.{}", self.total_bits, self.frac_bits)
    }
}

impl FxpFormat {
    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self, FxpError> {
        if !(2..=32).contains(&total_bits) {
            return Err(FxpError::BadTotalBits(total_bits));
        }
        if frac_bits >= total_bits {
            return Err(FxpError::BadFracBits { total: total_bits, frac: frac_bits });
        }
        Ok(Self { total_bits: total_bits as u8, frac_bits: frac_bits as u8 })
    }

    pub fn total_bits(&self) -> u32 {
        self.total_bits as u32
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits as u32
    }

    /// Largest representable raw value, `2^(total-1) - 1`.
    pub fn max_raw(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// Smallest representable raw value, `-2^(total-1)`.
    pub fn min_raw(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Value of one least-significant bit.
    pub fn step(&self) -> f64 {
        (self.frac_bits as i32).checked_neg().map(|e| (2.0f64).powi(e)).unwrap()
    }

    pub fn max_value(&self) -> f64 {
        self.max_raw() as f64 * self.step()
    }

    pub fn min_value(&self) -> f64 {
        self.min_raw() as f64 * self.step()
    }
}

/// Fixed-point real value: a raw two's-complement integer plus its format.
///
/// The `saturated` flag records whether any operation on the way to this
/// value clipped; it is diagnostic only and does not participate in
/// equality.
#[derive(Debug, Clone, Copy)]
pub struct FxpReal {
    raw: i64,
    fmt: FxpFormat,
    saturated: bool,
}

impl PartialEq for FxpReal {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw && self.fmt == other.fmt
    }
}

impl Eq for FxpReal {}

impl FxpReal {
    pub fn zero(fmt: FxpFormat) -> Self {
        Self { raw: 0, fmt, saturated: false }
    }

    pub fn from_raw(raw: i64, fmt: FxpFormat) -> Result<Self, FxpError> {
        if raw < fmt.min_raw() || raw > fmt.max_raw() {
            return Err(FxpError::RawOutOfRange { raw, fmt });
        }
        Ok(Self { raw, fmt, saturated: false })
    }

    pub fn raw(&self) -> i64 {
        self.raw
    }

    pub fn fmt(&self) -> FxpFormat {
        self.fmt
    }

    pub fn saturated(&self) -> bool {
        self.saturated
    }

    /// Real interpretation of the stored value.
    pub fn to_f64(&self) -> f64 {
        self.raw as f64 * self.fmt.step()
    }

    /// Clamp the activation at zero, the hardware ReLU.
    pub fn relu(&self) -> Self {
        Self { raw: self.raw.max(0), fmt: self.fmt, saturated: self.saturated }
    }
}

/// Fixed-point complex value; real and imaginary parts share one format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FxpComplex {
    re: FxpReal,
    im: FxpReal,
}

impl FxpComplex {
    pub fn new(re: FxpReal, im: FxpReal) -> Result<Self, FxpError> {
        if re.fmt != im.fmt {
            return Err(FxpError::FormatMismatch(re.fmt, im.fmt));
        }
        Ok(Self { re, im })
    }

    pub fn zero(fmt: FxpFormat) -> Self {
        Self { re: FxpReal::zero(fmt), im: FxpReal::zero(fmt) }
    }

    pub fn re(&self) -> FxpReal {
        self.re
    }

    pub fn im(&self) -> FxpReal {
        self.im
    }

    pub fn fmt(&self) -> FxpFormat {
        self.re.fmt
    }

    pub fn saturated(&self) -> bool {
        self.re.saturated || self.im.saturated
    }

    pub fn conj(&self) -> Result<Self, FxpError> {
        Ok(Self { re: self.re, im: fxp_neg(self.im) })
    }

    pub fn to_complex64(&self) -> crate::Complex64 {
        crate::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

/// Quantize a real number into `fmt`: round to nearest (ties to even) on the
/// `2^-frac` lattice, then saturate to the representable range. Saturation is
/// silent; the returned value carries a diagnostic flag.
pub fn quantize(x: f64, fmt: FxpFormat) -> FxpReal {
    if x.is_nan() {
        return FxpReal { raw: 0, fmt, saturated: true };
    }
    let scaled = x * (1u64 << fmt.frac_bits()) as f64;
    let rounded = scaled.round_ties_even();
    if rounded > fmt.max_raw() as f64 {
        FxpReal { raw: fmt.max_raw(), fmt, saturated: true }
    } else if rounded < fmt.min_raw() as f64 {
        FxpReal { raw: fmt.min_raw(), fmt, saturated: true }
    } else {
        FxpReal { raw: rounded as i64, fmt, saturated: false }
    }
}

/// Quantize a complex number component-wise.
pub fn quantize_complex(x: crate::Complex64, fmt: FxpFormat) -> FxpComplex {
    FxpComplex { re: quantize(x.re, fmt), im: quantize(x.im, fmt) }
}

fn clamp_raw(raw: i64, fmt: FxpFormat) -> (i64, bool) {
    if raw > fmt.max_raw() {
        (fmt.max_raw(), true)
    } else if raw < fmt.min_raw() {
        (fmt.min_raw(), true)
    } else {
        (raw, false)
    }
}

/// Saturating addition of two values in the same format.
pub fn fxp_add(a: FxpReal, b: FxpReal) -> Result<FxpReal, FxpError> {
    if a.fmt != b.fmt {
        return Err(FxpError::FormatMismatch(a.fmt, b.fmt));
    }
    // Q <= 32 so the raw sum cannot overflow i64.
    let (raw, sat) = clamp_raw(a.raw + b.raw, a.fmt);
    Ok(FxpReal { raw, fmt: a.fmt, saturated: sat || a.saturated || b.saturated })
}

/// Saturating subtraction, `a - b`.
pub fn fxp_sub(a: FxpReal, b: FxpReal) -> Result<FxpReal, FxpError> {
    if a.fmt != b.fmt {
        return Err(FxpError::FormatMismatch(a.fmt, b.fmt));
    }
    let (raw, sat) = clamp_raw(a.raw - b.raw, a.fmt);
    Ok(FxpReal { raw, fmt: a.fmt, saturated: sat || a.saturated || b.saturated })
}

/// Saturating negation (`-min_raw` clips to `max_raw`).
pub fn fxp_neg(a: FxpReal) -> FxpReal {
    let (raw, sat) = clamp_raw(-a.raw, a.fmt);
    FxpReal { raw, fmt: a.fmt, saturated: sat || a.saturated }
}

/// Shift the dropped low bits out of a double-width value, rounding to
/// nearest with ties to even.
fn rshift_round_half_even(v: i128, bits: u32) -> i128 {
    if bits == 0 {
        return v;
    }
    let floor = v >> bits;
    let rem = v - (floor << bits); // in [0, 2^bits)
    let half = 1i128 << (bits - 1);
    let round_up = rem > half || (rem == half && floor & 1 == 1);
    if round_up {
        floor + 1
    } else {
        floor
    }
}

/// Saturating multiplication: the product is formed in double-width integers
/// and quantized back to the operand format once.
pub fn fxp_mul(a: FxpReal, b: FxpReal) -> Result<FxpReal, FxpError> {
    if a.fmt != b.fmt {
        return Err(FxpError::FormatMismatch(a.fmt, b.fmt));
    }
    let wide = a.raw as i128 * b.raw as i128; // value * 2^(2*frac)
    let rescaled = rshift_round_half_even(wide, a.fmt.frac_bits());
    let (raw, sat) = if rescaled > a.fmt.max_raw() as i128 {
        (a.fmt.max_raw(), true)
    } else if rescaled < a.fmt.min_raw() as i128 {
        (a.fmt.min_raw(), true)
    } else {
        (rescaled as i64, false)
    };
    Ok(FxpReal { raw, fmt: a.fmt, saturated: sat || a.saturated || b.saturated })
}

/// Rescale a value by `2^shift`, re-quantizing into the same format. Left
/// shifts saturate; right shifts round half to even.
pub fn fxp_shift(a: FxpReal, shift: i32) -> FxpReal {
    if shift >= 0 {
        let wide = (a.raw as i128) << shift.min(80);
        let (raw, sat) = if wide > a.fmt.max_raw() as i128 {
            (a.fmt.max_raw(), true)
        } else if wide < a.fmt.min_raw() as i128 {
            (a.fmt.min_raw(), true)
        } else {
            (wide as i64, false)
        };
        FxpReal { raw, fmt: a.fmt, saturated: sat || a.saturated }
    } else {
        let bits = (-shift).min(80) as u32;
        let raw = rshift_round_half_even(a.raw as i128, bits) as i64;
        FxpReal { raw, fmt: a.fmt, saturated: a.saturated }
    }
}

/// Left-to-right saturating sum. Saturating addition is not associative, so
/// all order-sensitive reductions either use this or document their tree
/// shape explicitly.
pub fn fxp_sum(values: &[FxpReal]) -> Result<FxpReal, FxpError> {
    let mut iter = values.iter();
    let mut acc = *iter.next().expect("fxp_sum needs at least one value");
    for v in iter {
        acc = fxp_add(acc, *v)?;
    }
    Ok(acc)
}

/// Wide accumulator for reference comparisons only: sums products at full
/// double-width precision and quantizes once at the end. The hardware
/// datapath quantizes after every addition; this mode exists to measure what
/// that costs, not to model anything.
#[derive(Debug, Clone, Copy)]
pub struct WideAcc {
    fmt: FxpFormat,
    acc: i128,
}

impl WideAcc {
    pub fn new(fmt: FxpFormat) -> Self {
        Self { fmt, acc: 0 }
    }

    /// Accumulate `a * b` without intermediate rounding.
    pub fn mac(&mut self, a: FxpReal, b: FxpReal) -> Result<(), FxpError> {
        if a.fmt != self.fmt || b.fmt != self.fmt {
            return Err(FxpError::FormatMismatch(a.fmt, b.fmt));
        }
        self.acc += a.raw as i128 * b.raw as i128;
        Ok(())
    }

    /// Collapse to the operand format with one rounding and saturation.
    pub fn finish(self) -> FxpReal {
        let rescaled = rshift_round_half_even(self.acc, self.fmt.frac_bits());
        let (raw, sat) = if rescaled > self.fmt.max_raw() as i128 {
            (self.fmt.max_raw(), true)
        } else if rescaled < self.fmt.min_raw() as i128 {
            (self.fmt.min_raw(), true)
        } else {
            (rescaled as i64, false)
        };
        FxpReal { raw, fmt: self.fmt, saturated: sat }
    }
}

/// Complex multiplication with three real multipliers.
///
/// Computes `s1 = a.re*b.re`, `s2 = a.im*b.im`, `s3 = (a.re+a.im)*(b.re+b.im)`
/// and returns `(s1-s2) + j(s3-s1-s2)`. Every intermediate is quantized and
/// saturated back to the operand format, and the counter records exactly
/// 3 multiplications and 5 additions per call.
pub fn cmul3(a: FxpComplex, b: FxpComplex, ops: &mut OpCounter) -> Result<FxpComplex, FxpError> {
    if a.fmt() != b.fmt() {
        return Err(FxpError::FormatMismatch(a.fmt(), b.fmt()));
    }
    let s1 = fxp_mul(a.re, b.re)?;
    let s2 = fxp_mul(a.im, b.im)?;
    let ta = fxp_add(a.re, a.im)?;
    let tb = fxp_add(b.re, b.im)?;
    let s3 = fxp_mul(ta, tb)?;
    let re = fxp_sub(s1, s2)?;
    let im = fxp_sub(fxp_sub(s3, s1)?, s2)?;
    ops.mul(3);
    ops.add(5);
    Ok(FxpComplex { re, im })
}

/// Complex saturating addition (2 real additions).
pub fn cadd(a: FxpComplex, b: FxpComplex, ops: &mut OpCounter) -> Result<FxpComplex, FxpError> {
    ops.add(2);
    Ok(FxpComplex { re: fxp_add(a.re, b.re)?, im: fxp_add(a.im, b.im)? })
}

/// Fixed-point canceller output aligned with its input sequence; the first
/// `valid_from` entries are warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct FxpReconstruction {
    pub samples: Vec<FxpComplex>,
    pub valid_from: usize,
}

impl FxpReconstruction {
    pub fn valid(&self) -> &[FxpComplex] {
        &self.samples[self.valid_from..]
    }

    /// Real interpretation of all samples (warm-up included, as zeros or
    /// partial sums; align before comparing).
    pub fn to_complex64(&self) -> Vec<crate::Complex64> {
        self.samples.iter().map(|s| s.to_complex64()).collect()
    }

    pub fn any_saturated(&self) -> bool {
        self.samples[self.valid_from..].iter().any(|s| s.saturated())
    }
}

/// Pairwise adder tree over partial sums, ascending index, used by the
/// output interfaces of both hardware models. The reduction shape is part of
/// the datapath contract because saturating adds make it observable.
pub fn fxp_tree_sum(partials: &[FxpReal], ops: &mut OpCounter) -> Result<FxpReal, FxpError> {
    assert!(!partials.is_empty());
    let mut level: Vec<FxpReal> = partials.to_vec();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            if pair.len() == 2 {
                ops.add(1);
                next.push(fxp_add(pair[0], pair[1])?);
            } else {
                next.push(pair[0]);
            }
        }
        level = next;
    }
    Ok(level[0])
}

/// Complex pairwise adder tree, ascending index.
pub fn fxp_tree_sum_complex(
    partials: &[FxpComplex],
    ops: &mut OpCounter,
) -> Result<FxpComplex, FxpError> {
    assert!(!partials.is_empty());
    let mut level: Vec<FxpComplex> = partials.to_vec();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            if pair.len() == 2 {
                next.push(cadd(pair[0], pair[1], ops)?);
            } else {
                next.push(pair[0]);
            }
        }
        level = next;
    }
    Ok(level[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fmt(q: u32, f: u32) -> FxpFormat {
        FxpFormat::new(q, f).unwrap()
    }

    #[test]
    fn format_validation() {
        assert!(FxpFormat::new(1, 0).is_err());
        assert!(FxpFormat::new(33, 10).is_err());
        assert!(FxpFormat::new(8, 8).is_err());
        assert!(FxpFormat::new(2, 0).is_ok());
        assert!(FxpFormat::new(32, 31).is_ok());
    }

    #[test]
    fn quantize_zero_maps_to_zero() {
        let v = quantize(0.0, fmt(16, 12));
        assert_eq!(v.raw(), 0);
        assert!(!v.saturated());
    }

    #[test]
    fn quantize_exactly_representable() {
        let v = quantize(1.0, fmt(8, 6));
        assert_eq!(v.raw(), 64);
        assert_eq!(v.to_f64(), 1.0);
    }

    #[test]
    fn quantize_saturates_to_max() {
        let v = quantize(100.0, fmt(8, 6));
        assert_eq!(v.raw(), 127);
        assert!(v.saturated());
        assert_eq!(v.to_f64(), 1.984375);
        // Exhaustive over the 8-bit lattice: no representable value exceeds it.
        let f = fmt(8, 6);
        for raw in f.min_raw()..=f.max_raw() {
            let x = raw as f64 * f.step();
            assert!(x <= v.to_f64() + 1e-12);
        }
    }

    #[test]
    fn quantize_error_bound() {
        let f = fmt(16, 12);
        for &x in &[0.3, -0.7182, 1.99, -3.5001, 0.000123] {
            let v = quantize(x, f);
            assert!(!v.saturated());
            assert!((v.to_f64() - x).abs() <= f.step() / 2.0 + 1e-15);
        }
    }

    #[test]
    fn quantize_rounds_ties_to_even() {
        let f = fmt(8, 2);
        // 0.125 * 4 = 0.5: tie, rounds to raw 0 (even).
        assert_eq!(quantize(0.125, f).raw(), 0);
        // 0.375 * 4 = 1.5: tie, rounds to raw 2 (even).
        assert_eq!(quantize(0.375, f).raw(), 2);
    }

    #[test]
    fn add_exact_lattice_points() {
        let f = fmt(16, 12);
        let a = quantize(0.25, f);
        let b = quantize(0.5, f);
        assert_eq!(fxp_add(a, b).unwrap().to_f64(), 0.75);
    }

    #[test]
    fn add_saturates_at_max() {
        let f = fmt(8, 6);
        let max = FxpReal::from_raw(f.max_raw(), f).unwrap();
        let r = fxp_add(max, max).unwrap();
        assert_eq!(r.raw(), f.max_raw());
        assert!(r.saturated());
    }

    #[test]
    fn add_format_mismatch_is_error() {
        let a = quantize(0.5, fmt(8, 6));
        let b = quantize(0.5, fmt(8, 4));
        assert!(matches!(fxp_add(a, b), Err(FxpError::FormatMismatch(..))));
    }

    #[test]
    fn roundtrip_exhaustive_small_formats() {
        for q in 2..=12u32 {
            for f in 0..q {
                let format = fmt(q, f);
                for raw in format.min_raw()..=format.max_raw() {
                    let v = FxpReal::from_raw(raw, format).unwrap();
                    let rq = quantize(v.to_f64(), format);
                    assert_eq!(rq.raw(), raw, "roundtrip failed for raw {raw} in {format}");
                }
            }
        }
    }

    #[test]
    fn saturating_add_not_associative_witness() {
        let f = fmt(8, 0);
        let max = FxpReal::from_raw(127, f).unwrap();
        let minus = FxpReal::from_raw(-100, f).unwrap();
        // (max + max) + (-100) saturates first, max + (max + (-100)) does not.
        let left = fxp_add(fxp_add(max, max).unwrap(), minus).unwrap();
        let right = fxp_add(max, fxp_add(max, minus).unwrap()).unwrap();
        assert_ne!(left.raw(), right.raw());
        // fxp_sum pins the left-to-right order.
        let s = fxp_sum(&[max, max, minus]).unwrap();
        assert_eq!(s.raw(), left.raw());
    }

    #[test]
    fn cmul3_multiplicative_identity() {
        let f = fmt(16, 12);
        let one = FxpComplex::new(quantize(1.0, f), quantize(0.0, f)).unwrap();
        let mut ops = OpCounter::new();
        for &(re, im) in &[(0.3, -0.4), (1.25, 0.5), (-2.0, 1.75)] {
            let x = FxpComplex::new(quantize(re, f), quantize(im, f)).unwrap();
            let y = cmul3(one, x, &mut ops).unwrap();
            assert!((y.re().to_f64() - x.re().to_f64()).abs() <= f.step());
            assert!((y.im().to_f64() - x.im().to_f64()).abs() <= f.step());
        }
    }

    #[test]
    fn cmul3_algebra_matches_four_mult_form_exactly() {
        // The three-multiplier decomposition is an algebraic identity; check
        // it in exact integer arithmetic, before any quantization.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 40) as i64) - (1 << 23)
        };
        for _ in 0..10_000 {
            let (a, b, c, d) = (next() as i128, next() as i128, next() as i128, next() as i128);
            let s1 = a * c;
            let s2 = b * d;
            let s3 = (a + b) * (c + d);
            assert_eq!(s1 - s2, a * c - b * d);
            assert_eq!(s3 - s1 - s2, a * d + b * c);
        }
    }

    #[test]
    fn cmul3_counter_contract() {
        let f = fmt(16, 12);
        let x = FxpComplex::new(quantize(0.5, f), quantize(-0.25, f)).unwrap();
        let mut ops = OpCounter::new();
        let n = 17;
        for _ in 0..n {
            cmul3(x, x, &mut ops).unwrap();
        }
        assert_eq!(ops.real_mul, 3 * n);
        assert_eq!(ops.real_add, 5 * n);
    }

    #[test]
    fn wide_accumulator_is_at_least_as_accurate_as_stepwise() {
        let f = fmt(12, 8);
        let mut state = 77u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..50 {
            let pairs: Vec<(FxpReal, FxpReal)> = (0..24)
                .map(|_| (quantize(next() * 0.4, f), quantize(next() * 0.4, f)))
                .collect();
            let exact: f64 =
                pairs.iter().map(|(a, b)| a.to_f64() * b.to_f64()).sum();
            let mut wide = WideAcc::new(f);
            let mut step = FxpReal::zero(f);
            for &(a, b) in &pairs {
                wide.mac(a, b).unwrap();
                step = fxp_add(step, fxp_mul(a, b).unwrap()).unwrap();
            }
            let wide_err = (wide.finish().to_f64() - exact).abs();
            let step_err = (step.to_f64() - exact).abs();
            assert!(wide_err <= step_err + 1e-12, "wide {wide_err} vs stepwise {step_err}");
            assert!(wide_err <= f.step());
        }
    }

    #[test]
    fn shift_is_power_of_two_rescale() {
        let f = fmt(16, 8);
        let v = quantize(1.5, f);
        assert_eq!(fxp_shift(v, 2).to_f64(), 6.0);
        assert_eq!(fxp_shift(v, -1).to_f64(), 0.75);
        // Left shift saturates.
        let big = quantize(100.0, f);
        assert!(fxp_shift(big, 3).saturated());
    }

    proptest! {
        #[test]
        fn quantize_is_monotone(a in -200.0f64..200.0, b in -200.0f64..200.0) {
            let f = fmt(12, 7);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantize(lo, f).raw() <= quantize(hi, f).raw());
        }

        #[test]
        fn add_is_commutative(a in -8.0f64..8.0, b in -8.0f64..8.0) {
            let f = fmt(12, 7);
            let (x, y) = (quantize(a, f), quantize(b, f));
            prop_assert_eq!(fxp_add(x, y).unwrap().raw(), fxp_add(y, x).unwrap().raw());
        }

        #[test]
        fn add_matches_wide_integer_oracle(ra in -2048i64..=2047, rb in -2048i64..=2047) {
            let f = fmt(12, 5);
            let a = FxpReal::from_raw(ra, f).unwrap();
            let b = FxpReal::from_raw(rb, f).unwrap();
            let expect = (ra + rb).clamp(f.min_raw(), f.max_raw());
            prop_assert_eq!(fxp_add(a, b).unwrap().raw(), expect);
        }

        #[test]
        fn mul_matches_wide_integer_oracle(ra in -2048i64..=2047, rb in -2048i64..=2047) {
            let f = fmt(12, 5);
            let a = FxpReal::from_raw(ra, f).unwrap();
            let b = FxpReal::from_raw(rb, f).unwrap();
            let wide = ra as i128 * rb as i128;
            let expect = super::rshift_round_half_even(wide, 5)
                .clamp(f.min_raw() as i128, f.max_raw() as i128) as i64;
            prop_assert_eq!(fxp_mul(a, b).unwrap().raw(), expect);
        }

        #[test]
        fn cmul3_close_to_float_product(
            are in -1.5f64..1.5, aim in -1.5f64..1.5,
            bre in -1.5f64..1.5, bim in -1.5f64..1.5,
        ) {
            let f = fmt(24, 18);
            let a = quantize_complex(crate::Complex64::new(are, aim), f);
            let b = quantize_complex(crate::Complex64::new(bre, bim), f);
            let mut ops = OpCounter::new();
            let y = cmul3(a, b, &mut ops).unwrap();
            let exact = a.to_complex64() * b.to_complex64();
            prop_assert!((y.re().to_f64() - exact.re).abs() <= 2.0 * f.step());
            prop_assert!((y.im().to_f64() - exact.im).abs() <= 2.0 * f.step());
        }
    }
}
