//! The countable Dirac mixture over sequences whose frequency of ones tends
//! to `p*`.
//!
//! For horizons `n_j = 2^j` and bands `ε_l = 2^-l`, the set `S_j^l` holds one
//! representative per length-`n_j` binary string whose frequency of ones is
//! within `ε_l` of `p*`. Each representative gets weight
//! `weight(l)·weight(j)/|S_j^l|`. Only prefix-compatibility counts matter, so
//! everything is computed from binomial sums, never by enumeration.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::{log2_sum_exp, LogProb};
use crate::measures::{schedule, Symbol};

/// An exact non-negative rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frac {
    pub num: u64,
    pub den: u64,
}

impl Frac {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidParameter("zero denominator".into()));
        }
        Ok(Frac { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// `|ones/n − p| ≤ eps`, decided in integers.
fn in_band(ones: u64, n: u64, eps: Frac, p: Frac) -> bool {
    let lhs =
        (ones as i128 * p.den as i128 - p.num as i128 * n as i128).unsigned_abs() * eps.den as u128;
    let rhs = eps.num as u128 * n as u128 * p.den as u128;
    lhs <= rhs
}

/// `C(m, 0..=upto)`.
fn binomial_row(m: u64, upto: u64) -> Vec<BigUint> {
    let upto = upto.min(m);
    let mut row = Vec::with_capacity(upto as usize + 1);
    row.push(BigUint::one());
    for r in 0..upto {
        let next = &row[r as usize] * (m - r) / (r + 1);
        row.push(next);
    }
    row
}

/// Range of extra ones `r ∈ [lo, hi]` that put the total in the band.
fn window(ones: u64, len: u64, n_j: u64, eps: Frac, p: Frac) -> Option<(u64, u64)> {
    let m = n_j - len;
    let mut lo = None;
    let mut hi = None;
    for r in 0..=m {
        if in_band(ones + r, n_j, eps, p) {
            lo.get_or_insert(r);
            hi = Some(r);
        }
    }
    Some((lo?, hi?))
}

/// Number of length-`n_j` binary strings that extend a prefix of length
/// `len` with `ones` ones and whose frequency of ones is within `eps` of `p`.
pub fn count_extensions(ones: u64, len: u64, n_j: u64, eps: Frac, p_star: Frac) -> BigUint {
    assert!(
        ones <= len && len <= n_j,
        "prefix must fit inside the horizon"
    );
    let Some((lo, hi)) = window(ones, len, n_j, eps, p_star) else {
        return BigUint::zero();
    };
    let row = binomial_row(n_j - len, hi);
    row[lo as usize..=hi as usize].iter().sum()
}

fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits") as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("fits") as f64;
    top.log2() + shift as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypicalMixtureSpec {
    pub p_star: Frac,
    /// Horizons `n_j = 2^j` for `j = 1..=max_j`.
    pub max_j: u32,
    /// Bands `ε_l = 2^-l` for `l = 1..=max_l`.
    pub max_l: u32,
}

impl Default for TypicalMixtureSpec {
    fn default() -> Self {
        TypicalMixtureSpec {
            p_star: Frac { num: 1, den: 3 },
            max_j: 12,
            max_l: 6,
        }
    }
}

impl TypicalMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p_star.den == 0 || self.p_star.num > self.p_star.den {
            return Err(Error::InvalidParameter(
                "p* must be a fraction in [0, 1]".into(),
            ));
        }
        if self.max_j == 0 || self.max_l == 0 {
            return Err(Error::InvalidParameter(
                "truncation bounds must be at least 1".into(),
            ));
        }
        if self.max_j > 24 || self.max_l > 62 {
            return Err(Error::InvalidParameter(
                "truncation bounds too large (j ≤ 24, l ≤ 62)".into(),
            ));
        }
        Ok(())
    }

    pub fn horizon(&self, j: u32) -> u64 {
        1u64 << j
    }

    pub fn band(&self, l: u32) -> Frac {
        Frac {
            num: 1,
            den: 1u64 << l,
        }
    }

    pub fn max_horizon(&self) -> u64 {
        self.horizon(self.max_j)
    }
}

struct Level {
    n_j: u64,
    bands: Vec<(Frac, f64, f64)>,
}

/// Precomputed `|S_j^l|` and weights for a spec.
pub struct TypicalMixture {
    spec: TypicalMixtureSpec,
    levels: Vec<Level>,
}

/// One point of a loss curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypicalPoint {
    pub n: usize,
    pub per_symbol_bits: f64,
    /// Cross-entropy of the i.i.d. law with parameter `p*`.
    pub baseline_bits: f64,
}

impl TypicalMixture {
    pub fn new(spec: TypicalMixtureSpec) -> Result<Self> {
        spec.validate()?;
        let mut levels = Vec::new();
        for j in 1..=spec.max_j {
            let n_j = spec.horizon(j);
            let mut bands = Vec::new();
            for l in 1..=spec.max_l {
                let eps = spec.band(l);
                let size = count_extensions(0, 0, n_j, eps, spec.p_star);
                if size.is_zero() {
                    continue;
                }
                let lw = schedule::log2_weight(l as u64) + schedule::log2_weight(j as u64);
                bands.push((eps, lw, log2_big(&size)));
            }
            levels.push(Level { n_j, bands });
        }
        Ok(TypicalMixture { spec, levels })
    }

    pub fn spec(&self) -> &TypicalMixtureSpec {
        &self.spec
    }

    /// `log₂` of the mixture probability of a binary prefix.
    pub fn log_prob(&self, prefix: &[Symbol]) -> Result<LogProb> {
        if let Some(pos) = prefix.iter().position(|&s| s > 1) {
            return Err(Error::SymbolOutOfRange {
                symbol: prefix[pos] as usize,
                position: pos,
                alphabet: 2,
            });
        }
        let len = prefix.len() as u64;
        if len > self.spec.max_horizon() {
            return Err(Error::InvalidParameter(format!(
                "prefix length {len} exceeds the largest horizon {}",
                self.spec.max_horizon()
            )));
        }
        let ones = prefix.iter().filter(|&&s| s == 1).count() as u64;
        Ok(self.log_prob_counts(ones, len))
    }

    fn log_prob_counts(&self, ones: u64, len: u64) -> LogProb {
        let mut terms = Vec::new();
        for level in self.levels.iter().filter(|lv| lv.n_j >= len) {
            let windows: Vec<_> = level
                .bands
                .iter()
                .map(|(eps, _, _)| window(ones, len, level.n_j, *eps, self.spec.p_star))
                .collect();
            let Some(hi) = windows.iter().flatten().map(|w| w.1).max() else {
                continue;
            };
            let row = binomial_row(level.n_j - len, hi);
            for ((_, lw, log_size), w) in level.bands.iter().zip(&windows) {
                if let Some((lo, hi)) = w {
                    let count: BigUint = row[*lo as usize..=*hi as usize].iter().sum();
                    terms.push(lw + log2_big(&count) - log_size);
                }
            }
        }
        LogProb::new(log2_sum_exp(&terms))
    }

    /// Per-symbol code length `−(1/n) log₂` of the mixture at each checkpoint.
    pub fn loss_curve(&self, x: &[Symbol], checkpoints: &[usize]) -> Result<Vec<TypicalPoint>> {
        let p = self.spec.p_star.value();
        let mut out = Vec::with_capacity(checkpoints.len());
        for &n in checkpoints {
            if n == 0 || n > x.len() {
                return Err(Error::InvalidParameter(format!(
                    "checkpoint {n} outside 1..={}",
                    x.len()
                )));
            }
            let lp = self.log_prob(&x[..n])?;
            let ones = x[..n].iter().filter(|&&s| s == 1).count() as f64;
            let zeros = n as f64 - ones;
            let base = -(xlog(ones, p) + xlog(zeros, 1.0 - p)) / n as f64;
            out.push(TypicalPoint {
                n,
                per_symbol_bits: -lp.value() / n as f64,
                baseline_bits: base,
            });
        }
        Ok(out)
    }
}

fn xlog(count: f64, p: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * p.log2()
    }
}

/// Convenience wrapper around [`TypicalMixture::log_prob`].
pub fn typical_mixture_log_prob(spec: &TypicalMixtureSpec, prefix: &[Symbol]) -> Result<LogProb> {
    TypicalMixture::new(spec.clone())?.log_prob(prefix)
}
