//! Compensated accumulation.
//!
//! Neumaier's variant of Kahan summation: the compensation term also captures
//! the case where the incoming term is larger than the running sum. For the
//! iteration counts used here (up to 1e8 steps) naive summation would lose
//! up to ~eps*n/2 relative accuracy in the worst case; compensation keeps the
//! error independent of n.

/// Running sum with a first-order error compensation term.
#[derive(Debug, Clone, Copy)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new(x: f64) -> Self {
        Kahan { sum: x, comp: 0.0 }
    }

    pub fn zero() -> Self {
        Kahan::new(0.0)
    }

    /// Add `x`, folding the rounding error of the addition into `comp`.
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Best available estimate of the accumulated value.
    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Default for Kahan {
    fn default() -> Self {
        Kahan::zero()
    }
}
