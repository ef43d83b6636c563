//! Expected cumulative KL divergence
//! `d_n(μ, ρ) = Σ_{x ∈ X^n} μ(x) log₂(μ(x)/ρ(x))`, in bits.
//!
//! Three evaluators: exhaustive enumeration with pruning of μ-null subtrees,
//! a count-vector dynamic program for i.i.d. μ against count-sufficient ρ,
//! and seeded Monte Carlo. [`dn_auto`] picks the cheapest exact one.

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::log2_add;
use crate::measures::{
    sample_symbol, FiniteMixture, Measure, ProcessMeasure, Stepper, Symbol, DEFAULT_CAP,
};
use crate::report::{fmt_float, fmt_opt, to_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Dp,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Dp => "dp",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

/// One evaluation of `d_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub n: usize,
    /// Bits; `+inf` when ρ misses a μ-positive sequence.
    pub dn: f64,
    pub per_symbol: f64,
    pub method: Method,
    pub stderr: Option<f64>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    /// A sequence with `μ(x) > 0 = ρ(x)` when `dn` is infinite.
    pub witness: Option<Vec<Symbol>>,
}

impl LossReport {
    pub const CSV_HEADER: [&'static str; 7] = [
        "method",
        "n",
        "dn_bits",
        "per_symbol",
        "stderr",
        "samples",
        "seed",
    ];

    fn exact(method: Method, n: usize, dn: f64, witness: Option<Vec<Symbol>>) -> Self {
        LossReport {
            n,
            dn,
            per_symbol: per_symbol(dn, n),
            method,
            stderr: None,
            samples: None,
            seed: None,
            witness,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.dn == f64::INFINITY
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            self.n.to_string(),
            fmt_float(self.dn),
            fmt_float(self.per_symbol),
            fmt_opt(self.stderr),
            self.samples.map(|s| s.to_string()).unwrap_or_default(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

fn per_symbol(dn: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        dn / n as f64
    }
}

/// Serializes reports with the standard loss columns.
pub fn loss_csv(reports: &[LossReport]) -> Result<String> {
    to_csv(
        &LossReport::CSV_HEADER,
        reports.iter().map(|r| r.csv_record()),
    )
}

/// Knobs shared by the automatic evaluators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    /// Most sequences an exhaustive pass may visit.
    pub cap: u64,
    pub mc_samples: u64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            cap: DEFAULT_CAP,
            mc_samples: 1000,
            seed: 0,
        }
    }
}

struct Walk {
    n: usize,
    budget: u64,
    leaves: u64,
    prefix: Vec<Symbol>,
    seq_sum: f64,
    chain_sum: f64,
    witness: Option<Vec<Symbol>>,
}

enum Flow {
    Continue,
    Infinite,
    OverBudget,
}

fn complete_witness(mu: &dyn Stepper, prefix: &mut Vec<Symbol>, n: usize) {
    let mut s = mu.box_clone();
    while prefix.len() < n {
        let c = s.cond();
        let a = c.iter().position(|&p| p > 0.0).unwrap_or(0) as Symbol;
        s.advance(a);
        prefix.push(a);
    }
}

fn walk(mu: &dyn Stepper, rho: &dyn Stepper, lmu: f64, lrho: f64, w: &mut Walk) -> Flow {
    let cm = mu.cond();
    let cr = rho.cond();
    let depth = w.prefix.len();
    let pmu = lmu.exp2();
    let mut kl = 0.0;
    for (a, (&pm, &pr)) in cm.iter().zip(&cr).enumerate() {
        if pm <= 0.0 {
            continue;
        }
        if pr <= 0.0 {
            let mut x = w.prefix.clone();
            x.push(a as Symbol);
            let mut next = mu.box_clone();
            next.advance(a as Symbol);
            complete_witness(next.as_ref(), &mut x, w.n);
            w.witness = Some(x);
            return Flow::Infinite;
        }
        kl += pm * (pm.log2() - pr.log2());
    }
    w.chain_sum += pmu * kl;
    for (a, (&pm, &pr)) in cm.iter().zip(&cr).enumerate() {
        if pm <= 0.0 {
            continue;
        }
        let lm = lmu + pm.log2();
        let lr = lrho + pr.log2();
        if depth + 1 == w.n {
            w.leaves += 1;
            if w.leaves > w.budget {
                return Flow::OverBudget;
            }
            w.seq_sum += lm.exp2() * (lm - lr);
            continue;
        }
        let mut nm = mu.box_clone();
        let mut nr = rho.box_clone();
        nm.advance(a as Symbol);
        nr.advance(a as Symbol);
        w.prefix.push(a as Symbol);
        match walk(nm.as_ref(), nr.as_ref(), lm, lr, w) {
            Flow::Continue => {}
            other => return other,
        }
        w.prefix.pop();
    }
    Flow::Continue
}

fn run_walk(mu: &dyn ProcessMeasure, rho: &dyn ProcessMeasure, n: usize, cap: u64) -> Result<Walk> {
    if mu.alphabet() != rho.alphabet() {
        return Err(Error::AlphabetMismatch {
            expected: mu.alphabet().size(),
            found: rho.alphabet().size(),
        });
    }
    let mut w = Walk {
        n,
        budget: cap,
        leaves: 0,
        prefix: Vec::with_capacity(n),
        seq_sum: 0.0,
        chain_sum: 0.0,
        witness: None,
    };
    if n == 0 {
        return Ok(w);
    }
    let (sm, sr) = (mu.stepper(), rho.stepper());
    match walk(sm.as_ref(), sr.as_ref(), 0.0, 0.0, &mut w) {
        Flow::OverBudget => Err(Error::CapExceeded {
            what: "exact d_n enumeration",
            required: mu.alphabet().count(n),
            cap: cap as u128,
        }),
        Flow::Infinite => {
            w.seq_sum = f64::INFINITY;
            w.chain_sum = f64::INFINITY;
            Ok(w)
        }
        Flow::Continue => Ok(w),
    }
}

/// `d_n` by enumerating every μ-positive sequence of length `n`.
///
/// Visits at most `cap` leaves; μ-null subtrees are skipped, so a Dirac μ
/// costs a single path whatever `n` is.
pub fn exact_dn(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    cap: u64,
) -> Result<LossReport> {
    let w = run_walk(mu, rho, n, cap)?;
    Ok(LossReport::exact(
        Method::Exact,
        n,
        w.seq_sum.max(0.0),
        w.witness,
    ))
}

/// `d_n` accumulated in conditional form,
/// `Σ_t E_μ KL(μ(·|x_{<t}) ‖ ρ(·|x_{<t}))`, over the same traversal.
pub fn exact_dn_conditional(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    cap: u64,
) -> Result<LossReport> {
    let w = run_walk(mu, rho, n, cap)?;
    Ok(LossReport::exact(
        Method::Exact,
        n,
        w.chain_sum.max(0.0),
        w.witness,
    ))
}

fn kl_step(theta: &[f64], cond: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (&t, &r) in theta.iter().zip(cond) {
        if t <= 0.0 {
            continue;
        }
        if r <= 0.0 {
            return f64::INFINITY;
        }
        kl += t * (t.log2() - r.log2());
    }
    kl
}

/// `d_t(θ, ρ)` for every `t = 1..=n`, for i.i.d. θ against a ρ whose
/// conditionals depend on the prefix only through its symbol counts.
///
/// Runs over count vectors with their θ-probabilities (linear for binary
/// alphabets, log domain otherwise); the expected per-step KL is accumulated
/// level by level.
pub fn dp_dn_iid_trace(theta: &[f64], rho: &dyn ProcessMeasure, n: usize) -> Result<Vec<f64>> {
    let a = rho.alphabet().size();
    crate::measures::validate_dist(theta, a, "i.i.d. parameter")?;
    if rho.cond_from_counts(&vec![0; a]).is_none() {
        return Err(Error::NotCountSufficient(rho.tag()));
    }
    let log_theta: Vec<f64> = theta.iter().map(|t| t.log2()).collect();
    let mut trace = Vec::with_capacity(n);
    let mut total = 0.0;
    if a == 2 {
        // index = number of ones; masses below f64 range carry no KL weight
        let neg_entropy: f64 = theta.iter().filter(|&&t| t > 0.0).map(|t| t * t.log2()).sum();
        let mut level = vec![1.0f64];
        for t in 0..n {
            let mut step = 0.0;
            let mut next = vec![0.0f64; t + 2];
            for (ones, &p) in level.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let counts = [(t - ones) as u64, ones as u64];
                let cond = rho.cond_from_counts(&counts).expect("count-sufficient");
                let mut cross = 0.0;
                for s in 0..2 {
                    if theta[s] > 0.0 {
                        cross += if cond[s] > 0.0 { theta[s] * cond[s].log2() } else { f64::NEG_INFINITY };
                    }
                }
                step += p * (neg_entropy - cross);
                next[ones] += p * theta[0];
                next[ones + 1] += p * theta[1];
            }
            total += step;
            trace.push(total);
            level = next;
        }
    } else {
        let mut level: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        level.insert(vec![0; a], 0.0);
        for _ in 0..n {
            let mut step = 0.0;
            let mut next: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
            for (counts, &lm) in &level {
                let cond = rho.cond_from_counts(counts).expect("count-sufficient");
                step += lm.exp2() * kl_step(theta, &cond);
                for s in 0..a {
                    if theta[s] <= 0.0 {
                        continue;
                    }
                    let mut c = counts.clone();
                    c[s] += 1;
                    let e = next.entry(c).or_insert(f64::NEG_INFINITY);
                    *e = log2_add(*e, lm + log_theta[s]);
                }
            }
            total += step;
            trace.push(total);
            level = next;
        }
    }
    Ok(trace)
}

/// `d_n(θ, ρ)` by the count-vector dynamic program.
pub fn dp_dn_iid(theta: &[f64], rho: &dyn ProcessMeasure, n: usize) -> Result<LossReport> {
    let trace = dp_dn_iid_trace(theta, rho, n)?;
    let dn = trace.last().copied().unwrap_or(0.0);
    Ok(LossReport::exact(Method::Dp, n, dn, None))
}

/// Per-sample RNG: stream `i` of the ChaCha8 generator keyed by `seed`.
pub fn sample_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Draws `x ~ μ` and returns `log₂ μ(x) − log₂ ρ(x)` (or the witness).
fn mc_sample(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    seed: u64,
    i: u64,
) -> Result<f64, Vec<Symbol>> {
    let mut rng = sample_rng(seed, i);
    let mut sm = mu.stepper();
    let mut sr = rho.stepper();
    let mut x = Vec::with_capacity(n);
    let (mut lm, mut lr) = (0.0, 0.0);
    for _ in 0..n {
        let cm = sm.cond();
        let a = sample_symbol(&cm, &mut rng);
        let pr = sr.cond()[a as usize];
        x.push(a);
        if pr <= 0.0 {
            // finish the path under μ so the witness has full length
            sm.advance(a);
            while x.len() < n {
                let s = sample_symbol(&sm.cond(), &mut rng);
                sm.advance(s);
                x.push(s);
            }
            return Err(x);
        }
        lm += cm[a as usize].log2();
        lr += pr.log2();
        sm.advance(a);
        sr.advance(a);
    }
    Ok(lm - lr)
}

/// Monte Carlo estimate of `d_n` from `samples` draws of μ.
///
/// Sample `i` uses its own RNG stream, so the estimate depends only on
/// `(seed, samples)` and not on the thread count.
pub fn mc_dn(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<LossReport> {
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "Monte Carlo needs at least 2 samples".into(),
        ));
    }
    if mu.alphabet() != rho.alphabet() {
        return Err(Error::AlphabetMismatch {
            expected: mu.alphabet().size(),
            found: rho.alphabet().size(),
        });
    }
    let draws: Vec<Result<f64, Vec<Symbol>>> = (0..samples)
        .into_par_iter()
        .map(|i| mc_sample(mu, rho, n, seed, i))
        .collect();
    let mut values = Vec::with_capacity(draws.len());
    for d in draws {
        match d {
            Ok(v) => values.push(v),
            Err(witness) => {
                return Ok(LossReport {
                    n,
                    dn: f64::INFINITY,
                    per_symbol: f64::INFINITY,
                    method: Method::MonteCarlo,
                    stderr: None,
                    samples: Some(samples),
                    seed: Some(seed),
                    witness: Some(witness),
                })
            }
        }
    }
    let m = samples as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(LossReport {
        n,
        dn: mean,
        per_symbol: per_symbol(mean, n),
        method: Method::MonteCarlo,
        stderr: Some((var / m).sqrt()),
        samples: Some(samples),
        seed: Some(seed),
        witness: None,
    })
}

fn dp_applicable(mu: &dyn ProcessMeasure, rho: &dyn ProcessMeasure) -> Option<Vec<f64>> {
    let theta = mu.iid_theta()?;
    rho.cond_from_counts(&vec![0; rho.alphabet().size()])?;
    Some(theta)
}

/// Leaf budget for enumerating a μ whose support may be sparse when `A^n`
/// itself exceeds the cap.
const SPARSE_PROBE: u64 = 1 << 16;

/// `d_n` by the cheapest method that applies: the dynamic program, then
/// enumeration within `opts.cap`, then Monte Carlo.
///
/// When `A^n > opts.cap` enumeration is only attempted with a budget of
/// `min(cap, 2^16)` μ-positive leaves.
pub fn dn_auto(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    opts: &EvalOptions,
) -> Result<LossReport> {
    if let Some(theta) = dp_applicable(mu, rho) {
        return dp_dn_iid(&theta, rho, n);
    }
    let budget = if mu.alphabet().count(n) <= opts.cap as u128 {
        opts.cap
    } else {
        opts.cap.min(SPARSE_PROBE)
    };
    match exact_dn(mu, rho, n, budget) {
        Err(Error::CapExceeded { .. }) => mc_dn(mu, rho, n, opts.mc_samples, opts.seed),
        other => other,
    }
}

/// One point of a finite-horizon trace of `d_n / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DbarPoint {
    pub n: usize,
    pub per_symbol: f64,
    pub method: Method,
}

/// `(n, d_n/n)` over a horizon grid. A finite trace is evidence about the
/// limit, nothing more; no monotonicity is assumed.
pub fn dbar_proxy(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    grid: &[usize],
    opts: &EvalOptions,
) -> Result<Vec<DbarPoint>> {
    if let Some(theta) = dp_applicable(mu, rho) {
        let max = grid.iter().copied().max().unwrap_or(0);
        let trace = dp_dn_iid_trace(&theta, rho, max)?;
        return Ok(grid
            .iter()
            .map(|&n| DbarPoint {
                n,
                per_symbol: if n == 0 { 0.0 } else { trace[n - 1] / n as f64 },
                method: Method::Dp,
            })
            .collect());
    }
    grid.iter()
        .map(|&n| {
            let r = dn_auto(mu, rho, n, opts)?;
            Ok(DbarPoint {
                n,
                per_symbol: r.per_symbol,
                method: r.method,
            })
        })
        .collect()
}

/// Worst member of a finite class at horizon `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassLoss {
    /// `max_μ d_n(μ, ρ)/n`.
    pub value: f64,
    /// Lowest index attaining the maximum.
    pub argmax: usize,
    pub per_member: Vec<LossReport>,
}

pub fn class_loss(
    class: &[Measure],
    rho: &dyn ProcessMeasure,
    n: usize,
    opts: &EvalOptions,
) -> Result<ClassLoss> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let per_member = class
        .iter()
        .map(|m| dn_auto(m.as_ref(), rho, n, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut argmax = 0;
    for (i, r) in per_member.iter().enumerate() {
        if r.per_symbol > per_member[argmax].per_symbol {
            argmax = i;
        }
    }
    Ok(ClassLoss {
        value: per_member[argmax].per_symbol,
        argmax,
        per_member,
    })
}

/// `d_n(ν, ρ) − d_n(ν, μ)`: what using ρ instead of μ costs on ν.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretReport {
    pub n: usize,
    pub regret: f64,
    pub env: String,
    pub reference: String,
    pub predictor: String,
    pub loss_predictor: LossReport,
    pub loss_reference: LossReport,
}

impl RegretReport {
    pub const CSV_HEADER: [&'static str; 5] = ["env", "reference", "predictor", "n", "regret_bits"];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.env.clone(),
            self.reference.clone(),
            self.predictor.clone(),
            self.n.to_string(),
            fmt_float(self.regret),
        ]
    }
}

pub fn regret_n(
    nu: &dyn ProcessMeasure,
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    opts: &EvalOptions,
) -> Result<RegretReport> {
    let loss_predictor = dn_auto(nu, rho, n, opts)?;
    let loss_reference = dn_auto(nu, mu, n, opts)?;
    let regret = if loss_predictor.dn == loss_reference.dn {
        0.0
    } else {
        loss_predictor.dn - loss_reference.dn
    };
    Ok(RegretReport {
        n,
        regret,
        env: nu.tag(),
        reference: mu.tag(),
        predictor: rho.tag(),
        loss_predictor,
        loss_reference,
    })
}

/// `Σ w_j ν_j` as a measure, for dominance checks.
pub fn weighted_mixture(parts: Vec<(f64, Measure)>) -> Result<Measure> {
    Ok(FiniteMixture::new(parts)?.into_measure())
}
