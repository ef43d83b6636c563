//! Base-2 log-domain probabilities.
//!
//! Every sequence probability in the crate is carried as `log₂ p`, with
//! `-inf` standing for probability zero. Sums go through log-sum-exp.

use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

/// `log₂(2^a + 2^b)` without leaving the log domain.
#[inline]
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// `log₂ Σ 2^{xᵢ}`; the empty sum is `-inf`.
pub fn log2_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.iter().map(|&v| (v - max).exp2()).sum();
    max + s.log2()
}

/// A probability stored as its base-2 logarithm.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    pub const ONE: LogProb = LogProb(0.0);

    /// Wraps a base-2 log value. Values above zero are clamped to zero only
    /// when they are within rounding distance of it.
    pub fn new(log2: f64) -> Self {
        debug_assert!(!log2.is_nan(), "NaN log-probability");
        if log2 > 0.0 && log2 < 1e-9 {
            return LogProb(0.0);
        }
        LogProb(log2)
    }

    pub fn from_prob(p: f64) -> Self {
        LogProb(p.log2())
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn prob(self) -> f64 {
        self.0.exp2()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Code length in bits, `-log₂ p`.
    pub fn bits(self) -> f64 {
        -self.0
    }
}

/// Probability sum.
impl Add for LogProb {
    type Output = LogProb;
    fn add(self, rhs: LogProb) -> LogProb {
        LogProb(log2_add(self.0, rhs.0))
    }
}

/// Probability product.
impl Mul for LogProb {
    type Output = LogProb;
    fn mul(self, rhs: LogProb) -> LogProb {
        LogProb(self.0 + rhs.0)
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2^{}", self.0)
    }
}
