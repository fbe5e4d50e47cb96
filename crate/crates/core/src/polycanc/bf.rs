//! Basis functions of the parallel-Hammerstein model.
//!
//! A basis function of odd total order `p` is `BF_{p,q}(x) = x^q (x*)^(p-q)`
//! with `0 <= q <= p`. Two structural properties make their per-sample
//! computation cheap:
//!
//! 1. `BF_{p,q}(x) = conj(BF_{p,p-q}(x))`: only the upper half of each
//!    order needs multiplications, the rest are conjugates;
//! 2. `BF_{p,q}(x) = x^2 * BF_{p-2,q-2}(x)`: each order is one complex
//!    multiplication away from the order below it.
//!
//! [`bf_dp`] exploits both: after the two order-1 seeds, each remaining
//! basis function in the upper half costs one multiplication by the
//! precomputed `x^2`. Its multiplication counter equals
//! `(P+1)(P+3)/8 - 1` (one per recurrence step; conjugation is free).

use std::collections::VecDeque;

use crate::Complex64;

/// Index of one basis function: odd total order `p` and direct-power `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BfIndex {
    pub p: u32,
    pub q: u32,
}

/// Scalar over which basis functions can be evaluated. Implemented for
/// `Complex64` (production) and [`GaussianInt`] (exact verification).
pub trait BfValue: Copy {
    fn bf_mul(self, other: Self) -> Self;
    fn bf_conj(self) -> Self;
}

impl BfValue for Complex64 {
    #[inline]
    fn bf_mul(self, other: Self) -> Self {
        self * other
    }

    #[inline]
    fn bf_conj(self) -> Self {
        self.conj()
    }
}

/// Complex number with integer parts. Products are exact, so identities that
/// hold algebraically hold bit-for-bit; used to verify the recurrence against
/// the direct definition without floating-point noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianInt {
    pub re: i128,
    pub im: i128,
}

impl GaussianInt {
    pub fn new(re: i128, im: i128) -> Self {
        Self { re, im }
    }
}

impl BfValue for GaussianInt {
    fn bf_mul(self, other: Self) -> Self {
        let re = self.re.checked_mul(other.re).unwrap() - self.im.checked_mul(other.im).unwrap();
        let im = self.re.checked_mul(other.im).unwrap() + self.im.checked_mul(other.re).unwrap();
        Self { re, im }
    }

    fn bf_conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("maximum order must be odd and positive, got {0}")]
pub struct BadOrder(pub u32);

/// Number of basis functions per sample for maximum order `p_max`:
/// `(P+1)(P+3)/4`.
pub fn per_sample_count(p_max: u32) -> usize {
    ((p_max as usize + 1) * (p_max as usize + 3)) / 4
}

/// Flat storage index of `(p, q)`: blocks of ascending odd `p`, ascending `q`
/// inside each block.
#[inline]
pub fn flat_index(p: u32, q: u32) -> usize {
    debug_assert!(p % 2 == 1 && q <= p);
    let m = (p as usize - 1) / 2;
    m * (m + 1) + q as usize
}

/// All `(p, q)` indices for maximum order `p_max`, in flat-index order.
pub fn bf_indices(p_max: u32) -> Vec<BfIndex> {
    let mut out = Vec::with_capacity(per_sample_count(p_max));
    let mut p = 1;
    while p <= p_max {
        for q in 0..=p {
            out.push(BfIndex { p, q });
        }
        p += 2;
    }
    out
}

/// Literal evaluation of `x^q (x*)^(p-q)`. This is the defining form and the
/// oracle for [`bf_dp`].
pub fn bf_direct<T: BfValue>(x: T, p: u32, q: u32) -> T {
    debug_assert!(p % 2 == 1 && q <= p);
    let conj = x.bf_conj();
    let mut acc: Option<T> = None;
    for _ in 0..q {
        acc = Some(match acc {
            None => x,
            Some(a) => a.bf_mul(x),
        });
    }
    for _ in 0..(p - q) {
        acc = Some(match acc {
            None => conj,
            Some(a) => a.bf_mul(conj),
        });
    }
    acc.expect("p >= 1")
}

/// All basis functions of one sample, flat-index order.
#[derive(Debug, Clone)]
pub struct BfSet<T> {
    pub p_max: u32,
    pub values: Vec<T>,
    /// Complex multiplications spent on the recurrence,
    /// `(P+1)(P+3)/8 - 1` (zero for order 1).
    pub mul_count: u64,
}

impl<T: Copy> BfSet<T> {
    #[inline]
    pub fn get(&self, p: u32, q: u32) -> T {
        self.values[flat_index(p, q)]
    }
}

/// Dynamic-programming evaluation of every basis function of `x` up to
/// `p_max`, seeding order 1 with `{x*, x}` and walking the order-2 recurrence
/// on the upper half of each order; the lower half is conjugated for free.
///
/// ```
/// use sic_core::polycanc::bf_dp;
/// use sic_core::Complex64;
///
/// let set = bf_dp(Complex64::new(0.6, -0.2), 7).unwrap();
/// assert_eq!(set.values.len(), 20);  // (7+1)(7+3)/4
/// assert_eq!(set.mul_count, 9);      // (7+1)(7+3)/8 - 1
/// ```
pub fn bf_dp<T: BfValue>(x: T, p_max: u32) -> Result<BfSet<T>, BadOrder> {
    if p_max == 0 || p_max % 2 == 0 {
        return Err(BadOrder(p_max));
    }
    let mut values = Vec::with_capacity(per_sample_count(p_max));
    values.push(x.bf_conj()); // (1, 0)
    values.push(x); // (1, 1)
    let mut mul_count = 0u64;
    if p_max >= 3 {
        let xsq = x.bf_mul(x);
        let mut p = 3;
        while p <= p_max {
            let base = values.len();
            values.resize(base + p as usize + 1, x);
            for q in (p + 1) / 2..=p {
                let prev = values[flat_index(p - 2, q - 2)];
                let v = xsq.bf_mul(prev);
                mul_count += 1;
                values[base + q as usize] = v;
                values[base + (p - q) as usize] = v.bf_conj();
            }
            p += 2;
        }
    }
    Ok(BfSet { p_max, values, mul_count })
}

/// Sliding store of the basis functions of the `L-1` most recent past
/// samples. Only the newest sample's functions must be computed per step;
/// the rest are reused, which is what keeps the per-sample multiplication
/// cost independent of the memory length.
#[derive(Debug, Clone)]
pub struct BfBuffer<T> {
    lags: usize,
    per_sample: usize,
    ring: VecDeque<Vec<T>>,
}

impl<T: Copy> BfBuffer<T> {
    /// Buffer for memory length `l` and maximum order `p_max`
    /// (`l - 1` lagged sample slots).
    pub fn new(l: usize, p_max: u32) -> Self {
        assert!(l >= 1);
        Self { lags: l - 1, per_sample: per_sample_count(p_max), ring: VecDeque::new() }
    }

    /// Storage depth in complex values: `(L-1)(P+1)(P+3)/4`.
    pub fn depth(&self) -> usize {
        self.lags * self.per_sample
    }

    /// True once every lag slot is populated.
    pub fn warm(&self) -> bool {
        self.ring.len() == self.lags
    }

    /// Basis functions of the sample `lag >= 1` steps in the past.
    pub fn lagged(&self, lag: usize) -> &[T] {
        debug_assert!(lag >= 1 && lag <= self.ring.len());
        &self.ring[lag - 1]
    }

    /// Insert the newest sample's functions, evicting the oldest lag.
    pub fn push(&mut self, fresh: Vec<T>) {
        debug_assert_eq!(fresh.len(), self.per_sample);
        if self.lags == 0 {
            return;
        }
        if self.ring.len() == self.lags {
            self.ring.pop_back();
        }
        self.ring.push_front(fresh);
    }
}
