//! Finite-horizon minimax values over finite classes.
//!
//! The minimax value `min_ρ max_μ d_n(μ,ρ)` over a finite class equals the
//! capacity `max_W I(W)` of the channel `i ↦ μ_i` on `X^n`, attained by the
//! Bayes mixture of the capacity-achieving prior. [`capacity_iterate`] runs
//! Blahut–Arimoto on the exact `|C| × A^n` joint and stops once the sandwich
//! `Σ_i W_i D_i ≤ value ≤ max_i D_i` is tighter than the tolerance.
//! Everything here is per horizon; nothing is claimed about limits.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::loss::{dn_auto, EvalOptions, LossReport, Method};
use crate::measures::{log_prob_table, FiniteMixture, Measure, Member, ModelClass, ProcessMeasure};
use crate::report::{fmt_float, to_csv};

/// A probability vector over the members of a finite class.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorVector(Vec<f64>);

impl PriorVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyClass);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "prior weights must be non-negative".into(),
            ));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "prior weights sum to {s}, not 1"
            )));
        }
        Ok(PriorVector(weights))
    }

    pub fn uniform(len: usize) -> Self {
        PriorVector(vec![1.0 / len as f64; len])
    }

    /// All mass on member `j`.
    pub fn point(len: usize, j: usize) -> Self {
        let mut w = vec![0.0; len];
        w[j] = 1.0;
        PriorVector(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `Σ_i W_i d_n(μ_i, ρ)/n`.
pub fn bayes_risk(
    prior: &PriorVector,
    rho: &dyn ProcessMeasure,
    class: &[Measure],
    n: usize,
    opts: &EvalOptions,
) -> Result<f64> {
    if prior.len() != class.len() {
        return Err(Error::InvalidParameter(format!(
            "prior has {} weights for {} members",
            prior.len(),
            class.len()
        )));
    }
    let mut risk = 0.0;
    for (&w, m) in prior.weights().iter().zip(class) {
        if w > 0.0 {
            risk += w * dn_auto(m.as_ref(), rho, n, opts)?.per_symbol;
        }
    }
    Ok(risk)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityOptions {
    /// Per-symbol width of the certified sandwich.
    pub tol: f64,
    pub max_iter: usize,
    /// Bound on `|C|·A^n`.
    pub cap: u64,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions {
            tol: 1e-6,
            max_iter: 1_000_000,
            cap: 1 << 24,
        }
    }
}

/// Output of [`capacity_iterate`]; all values in bits per symbol.
#[derive(Clone, Debug)]
pub struct CapacityResult {
    pub n: usize,
    /// Midpoint of the sandwich.
    pub value_bits_per_symbol: f64,
    /// `Σ_i W_i d_n(μ_i, ρ*)/n`, a lower bound on the minimax value.
    pub lower: f64,
    /// `max_i d_n(μ_i, ρ*)/n`, an upper bound on the minimax value.
    pub upper: f64,
    pub gap: f64,
    pub prior: PriorVector,
    /// Members with positive prior weight.
    pub support: Vec<usize>,
    /// The Bayes mixture of the prior over its support.
    pub bayes_mixture: FiniteMixture,
    /// `d_n(μ_i, ρ*)/n` per member.
    pub risks: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl CapacityResult {
    pub const CSV_HEADER: [&'static str; 5] = ["class_id", "n", "value_bits", "gap", "iterations"];

    pub fn csv_record(&self, class_id: &str) -> Vec<String> {
        vec![
            class_id.to_string(),
            self.n.to_string(),
            fmt_float(self.value_bits_per_symbol),
            fmt_float(self.gap),
            self.iterations.to_string(),
        ]
    }

    /// The class document with member weights replaced by the prior.
    pub fn prior_document(&self, class: &ModelClass) -> Result<ModelClass> {
        if class.len() != self.prior.len() {
            return Err(Error::InvalidParameter(
                "class does not match the prior".into(),
            ));
        }
        let mut doc = ModelClass::new(class.name.clone(), class.alphabet);
        for (m, &w) in class.member.iter().zip(self.prior.weights()) {
            if w > 0.0 {
                doc.member.push(Member {
                    id: m.id.clone(),
                    weight: Some(w),
                    model: m.model.clone(),
                });
            }
        }
        Ok(doc)
    }
}

pub fn capacity_csv(rows: &[(String, CapacityResult)]) -> Result<String> {
    to_csv(
        &CapacityResult::CSV_HEADER,
        rows.iter().map(|(id, r)| r.csv_record(id)),
    )
}

struct Channel {
    probs: Vec<Vec<f64>>,
    neg_entropy: Vec<f64>,
}

impl Channel {
    fn build(class: &[Measure], n: usize, cap: u64) -> Result<Self> {
        let alphabet = class[0].alphabet();
        let joint = alphabet.count(n).saturating_mul(class.len() as u128);
        if joint > cap as u128 {
            return Err(Error::CapExceeded {
                what: "capacity joint table",
                required: joint,
                cap: cap as u128,
            });
        }
        let mut probs = Vec::with_capacity(class.len());
        let mut neg_entropy = Vec::with_capacity(class.len());
        for m in class {
            if m.alphabet() != alphabet {
                return Err(Error::AlphabetMismatch {
                    expected: alphabet.size(),
                    found: m.alphabet().size(),
                });
            }
            let t = log_prob_table(m.as_ref(), n, u64::MAX)?;
            neg_entropy.push(
                t.iter()
                    .filter(|l| l.is_finite())
                    .map(|&l| l.exp2() * l)
                    .sum(),
            );
            probs.push(t.into_iter().map(f64::exp2).collect());
        }
        Ok(Channel { probs, neg_entropy })
    }

    /// `D_i = d_n(μ_i, Σ_j W_j μ_j)` in bits.
    fn divergences(&self, w: &[f64], log_r: &mut [f64]) -> Vec<f64> {
        log_r.iter_mut().for_each(|r| *r = 0.0);
        for (wi, p) in w.iter().zip(&self.probs) {
            if *wi > 0.0 {
                for (r, &px) in log_r.iter_mut().zip(p) {
                    *r += wi * px;
                }
            }
        }
        log_r.iter_mut().for_each(|r| *r = r.log2());
        self.probs
            .iter()
            .zip(&self.neg_entropy)
            .map(|(p, &ne)| {
                let mut cross = 0.0;
                for (&px, &lr) in p.iter().zip(log_r.iter()) {
                    if px > 0.0 {
                        if lr == f64::NEG_INFINITY {
                            return f64::INFINITY;
                        }
                        cross += px * lr;
                    }
                }
                (ne - cross).max(0.0)
            })
            .collect()
    }
}

/// Blahut–Arimoto from the uniform prior. Stops once the sandwich gap and
/// the spread of risks over members weighted above `tol` are both within
/// `tol`. Returns the best sandwich found with `converged = false` when
/// `max_iter` runs out.
pub fn capacity_iterate(
    class: &[Measure],
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<CapacityResult> {
    capacity_with(
        class,
        n,
        &CapacityOptions {
            tol,
            max_iter,
            ..Default::default()
        },
    )
}

pub fn capacity_with(
    class: &[Measure],
    n: usize,
    opts: &CapacityOptions,
) -> Result<CapacityResult> {
    if class.is_empty() {
        return Err(Error::EmptyClass);
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let ch = Channel::build(class, n, opts.cap)?;
    let nf = n as f64;
    let len = ch.probs[0].len();
    let mut log_r = vec![0.0; len];
    let mut w = vec![1.0 / class.len() as f64; class.len()];
    let mut best: Option<(f64, f64, Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let d = ch.divergences(&w, &mut log_r);
        let lower: f64 = w
            .iter()
            .zip(&d)
            .filter(|(wi, _)| **wi > 0.0)
            .map(|(wi, di)| wi * di)
            .sum::<f64>()
            / nf;
        let upper = d.iter().copied().fold(0.0, f64::max) / nf;
        let better = best.as_ref().is_none_or(|b| upper - lower < b.1 - b.0);
        if better {
            best = Some((lower, upper, w.clone(), d.clone()));
        }
        let floor = w
            .iter()
            .zip(&d)
            .filter(|(wi, _)| **wi > opts.tol)
            .map(|(_, di)| *di)
            .fold(f64::INFINITY, f64::min)
            / nf;
        if upper - lower <= opts.tol && upper - floor <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let max_d = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (wi, di) in w.iter_mut().zip(&d) {
            *wi *= (di - max_d).exp2();
            z += *wi;
        }
        w.iter_mut().for_each(|wi| *wi /= z);
    }
    let (lower, upper, w, d) = best.expect("at least one evaluation");
    let support: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let bayes_mixture =
        FiniteMixture::new(support.iter().map(|&i| (w[i], class[i].clone())).collect())?;
    let s: f64 = w.iter().sum();
    Ok(CapacityResult {
        n,
        value_bits_per_symbol: 0.5 * (lower + upper),
        lower,
        upper,
        gap: upper - lower,
        prior: PriorVector(w.iter().map(|x| x / s).collect()),
        support,
        bayes_mixture,
        risks: d.iter().map(|x| x / nf).collect(),
        iterations,
        converged,
    })
}

/// Upper (minimax) and lower (maximin) values at one horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxGap {
    pub n: usize,
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
    pub converged: bool,
}

impl MinimaxGap {
    pub const NOTE: &'static str = "finite-horizon, finite-class evidence only";
}

pub fn minimax_gap(class: &[Measure], n: usize, tol: f64) -> Result<MinimaxGap> {
    let r = capacity_iterate(class, n, tol, CapacityOptions::default().max_iter)?;
    Ok(MinimaxGap {
        n,
        upper: r.upper,
        lower: r.lower,
        gap: r.gap,
        converged: r.converged,
    })
}

/// Comparison of ρ with `ρ′ = ½(ρ + μ)` on μ.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub n: usize,
    pub original: LossReport,
    pub mixed: LossReport,
    /// `d_n(μ,ρ) − d_n(μ,ρ′)`.
    pub improvement: f64,
    /// `d_n(μ,ρ′) ≤ 1` bit, allowing 4 standard errors for Monte Carlo.
    pub bound_holds: bool,
    /// The improvement exceeds one bit.
    pub dominated: bool,
}

pub fn admissibility_check(
    rho: &Measure,
    mu: &Measure,
    n: usize,
    opts: &EvalOptions,
) -> Result<AdmissibilityReport> {
    let mixed: Measure = Arc::new(FiniteMixture::new(vec![
        (0.5, rho.clone()),
        (0.5, mu.clone()),
    ])?);
    let original = dn_auto(mu.as_ref(), rho.as_ref(), n, opts)?;
    let mixed_loss = dn_auto(mu.as_ref(), mixed.as_ref(), n, opts)?;
    let slack = match mixed_loss.method {
        Method::MonteCarlo => 4.0 * mixed_loss.stderr.unwrap_or(0.0),
        _ => 1e-9,
    };
    let improvement = if original.dn == mixed_loss.dn {
        0.0
    } else {
        original.dn - mixed_loss.dn
    };
    Ok(AdmissibilityReport {
        n,
        bound_holds: mixed_loss.dn <= 1.0 + slack,
        dominated: improvement > 1.0,
        improvement,
        original,
        mixed: mixed_loss,
    })
}
