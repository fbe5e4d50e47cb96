//! Operation-count instrumentation.
//!
//! Complexity comparisons between cancellers are stated in real-valued
//! additions and multiplications. Evaluators that participate in those
//! comparisons take an explicit [`OpCounter`] context so that counting is
//! per-caller: concurrent workers each own their counter and nothing is
//! shared behind the scenes.

/// Tally of real-valued arithmetic operations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub real_add: u64,
    pub real_mul: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, n: u64) {
        self.real_add += n;
    }

    #[inline]
    pub fn mul(&mut self, n: u64) {
        self.real_mul += n;
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}
