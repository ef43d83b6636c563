//! Process measures over finite alphabets.
//!
//! A [`ProcessMeasure`] is queried through conditional next-symbol
//! distributions; the probability of a finite sequence is the product of its
//! conditionals, so measure consistency holds by construction. Evaluation
//! passes walk a sequence with a [`Stepper`], a cursor owned by that pass,
//! which keeps per-step cost independent of the prefix length. The measure
//! objects themselves are immutable.

mod document;
mod mixture;
mod models;
pub mod schedule;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::LogProb;

pub use document::{Member, ModelClass, ModelSpec};
pub use mixture::{mix_with_uniform, posterior_weights, FiniteMixture};
pub use models::{Dirac, Iid, Kt, MarkovChain};
pub use schedule::weight;

/// A symbol of an alphabet with at most 256 letters.
pub type Symbol = u8;

/// Shared handle to a measure.
pub type Measure = Arc<dyn ProcessMeasure>;

/// Default bound on the number of sequences an exhaustive pass may visit.
pub const DEFAULT_CAP: u64 = 1 << 22;

/// Tolerance for a conditional distribution to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A finite alphabet `{0, …, A-1}` with `2 ≤ A ≤ 256`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(u16);

impl Alphabet {
    pub const BINARY: Alphabet = Alphabet(2);

    pub fn new(size: usize) -> Result<Self> {
        if (2..=256).contains(&size) {
            Ok(Alphabet(size as u16))
        } else {
            Err(Error::InvalidAlphabet(size))
        }
    }

    #[inline]
    pub fn size(self) -> usize {
        self.0 as usize
    }

    /// `M = log₂ A`, the cost of one symbol under the uniform measure.
    pub fn bits_per_symbol(self) -> f64 {
        (self.0 as f64).log2()
    }

    pub fn check(self, x: &[Symbol]) -> Result<()> {
        match x.iter().position(|&s| s as usize >= self.size()) {
            None => Ok(()),
            Some(position) => Err(Error::SymbolOutOfRange {
                symbol: x[position] as usize,
                position,
                alphabet: self.size(),
            }),
        }
    }

    /// `A^n`, saturating at `u128::MAX`.
    pub fn count(self, n: usize) -> u128 {
        let mut total: u128 = 1;
        for _ in 0..n {
            total = total.saturating_mul(self.size() as u128);
        }
        total
    }

    /// Fails unless `A^n ≤ cap`.
    pub fn check_cap(self, n: usize, cap: u64, what: &'static str) -> Result<usize> {
        let required = self.count(n);
        if required > cap as u128 || required > u32::MAX as u128 {
            return Err(Error::CapExceeded {
                what,
                required,
                cap: cap as u128,
            });
        }
        Ok(required as usize)
    }

    /// Radix-`A` code of `x`, first symbol most significant. Codes of a fixed
    /// length therefore sort lexicographically.
    pub fn encode(self, x: &[Symbol]) -> u32 {
        x.iter()
            .fold(0u32, |acc, &s| acc * self.size() as u32 + s as u32)
    }

    pub fn decode(self, mut code: u32, n: usize) -> Vec<Symbol> {
        let a = self.size() as u32;
        let mut x = vec![0; n];
        for slot in x.iter_mut().rev() {
            *slot = (code % a) as Symbol;
            code /= a;
        }
        x
    }

    pub fn uniform(self) -> Vec<f64> {
        vec![1.0 / self.size() as f64; self.size()]
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = Error;
    fn try_from(size: usize) -> Result<Self> {
        Alphabet::new(size)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.size()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Parses a digit string such as `"0102"` into symbols.
pub fn parse_seq(s: &str) -> Result<Vec<Symbol>> {
    s.chars()
        .map(|c| {
            c.to_digit(36)
                .map(|d| d as Symbol)
                .ok_or_else(|| Error::InvalidParameter(format!("bad symbol {c:?} in {s:?}")))
        })
        .collect()
}

/// Cursor over one sequence: the conditional distribution of the next symbol
/// given everything advanced so far.
pub trait Stepper {
    fn cond(&self) -> Vec<f64>;
    fn advance(&mut self, symbol: Symbol);
    fn box_clone(&self) -> Box<dyn Stepper + '_>;
}

/// A probability measure on one-way infinite sequences, given by its
/// conditional next-symbol distributions.
pub trait ProcessMeasure: Send + Sync + fmt::Debug {
    fn alphabet(&self) -> Alphabet;

    /// Human-readable identity.
    fn tag(&self) -> String;

    fn stepper(&self) -> Box<dyn Stepper + '_>;

    /// Conditional distribution of the next symbol. After a prefix of
    /// probability zero this is uniform.
    fn cond_dist(&self, prefix: &[Symbol]) -> Vec<f64> {
        let mut s = self.stepper();
        for &x in prefix {
            s.advance(x);
        }
        s.cond()
    }

    /// Parameter vector when the measure is i.i.d.
    fn iid_theta(&self) -> Option<Vec<f64>> {
        None
    }

    /// Conditional given only symbol counts, for predictors whose
    /// conditionals depend on the prefix only through them.
    fn cond_from_counts(&self, _counts: &[u64]) -> Option<Vec<f64>> {
        None
    }

    /// Document form, when the measure can be serialized.
    fn spec(&self) -> Option<ModelSpec> {
        None
    }
}

/// `log₂ m(x)`.
pub fn log_prob(m: &dyn ProcessMeasure, x: &[Symbol]) -> Result<LogProb> {
    m.alphabet().check(x)?;
    let mut s = m.stepper();
    let mut lp = 0.0;
    for &sym in x {
        let p = s.cond()[sym as usize];
        if p <= 0.0 {
            return Ok(LogProb::ZERO);
        }
        lp += p.log2();
        s.advance(sym);
    }
    Ok(LogProb::new(lp))
}

/// `log₂ m(x)` for every `x ∈ X^n`, indexed by [`Alphabet::encode`].
pub fn log_prob_table(m: &dyn ProcessMeasure, n: usize, cap: u64) -> Result<Vec<f64>> {
    let alphabet = m.alphabet();
    let len = alphabet.check_cap(n, cap, "log-probability table")?;
    let mut out = vec![f64::NEG_INFINITY; len];
    if n == 0 {
        out[0] = 0.0;
        return Ok(out);
    }
    let stepper = m.stepper();
    fill_table(stepper.as_ref(), alphabet.size(), 0, n, 0, 0.0, &mut out);
    Ok(out)
}

fn fill_table(
    stepper: &dyn Stepper,
    a: usize,
    depth: usize,
    n: usize,
    code: usize,
    lp: f64,
    out: &mut [f64],
) {
    let cond = stepper.cond();
    for (sym, &p) in cond.iter().enumerate() {
        let child = code * a + sym;
        let l = if p > 0.0 {
            lp + p.log2()
        } else {
            f64::NEG_INFINITY
        };
        if depth + 1 == n {
            out[child] = l;
        } else if l > f64::NEG_INFINITY {
            let mut next = stepper.box_clone();
            next.advance(sym as Symbol);
            fill_table(next.as_ref(), a, depth + 1, n, child, l, out);
        }
        // zero-mass subtrees keep their -inf initialization
    }
}

/// Draws a symbol from `dist` by inversion.
pub fn sample_symbol<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> Symbol {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (a, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = a;
            if u < acc {
                return a as Symbol;
            }
        }
    }
    last as Symbol
}

/// Samples `x_{1..n}` from `m`.
pub fn sample<R: Rng + ?Sized>(m: &dyn ProcessMeasure, n: usize, rng: &mut R) -> Vec<Symbol> {
    let mut s = m.stepper();
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        let sym = sample_symbol(&s.cond(), rng);
        s.advance(sym);
        x.push(sym);
    }
    x
}

/// Checks that `p` is a probability vector of the given length.
pub(crate) fn validate_dist(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::InvalidParameter(format!(
            "{what}: expected {len} entries, found {}",
            p.len()
        )));
    }
    if p.iter().any(|&v| !(0.0..=1.0).contains(&v) || v.is_nan()) {
        return Err(Error::InvalidParameter(format!(
            "{what}: entries must lie in [0, 1]"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidParameter(format!(
            "{what}: entries sum to {sum}, not 1"
        )));
    }
    Ok(())
}
