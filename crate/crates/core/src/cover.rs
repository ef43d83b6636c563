//! Greedy extraction of a Bayesian mixture from a finite class.
//!
//! For a horizon `n` and `k` levels, each member μ gets a likelihood set
//! `T_μ = {x : μ(x)/ρ(x) ≥ 1/n}`, split into `k` cells by the per-symbol
//! score `(1/n) log₂(μ(x)/ρ(x))`. For every cell index `i` a greedy cover
//! repeatedly picks the member whose cell adds the most uncovered ρ-mass.
//! The picked members, weighted by the step schedule and summed over cells
//! and grid points, form the extracted mixture ν. [`dominance_audit`] checks
//! the resulting inequalities sequence by sequence.
//!
//! Sequences are radix-`A` codes (`u32`) of length-`n` strings; all sets are
//! sorted code vectors.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{
    log_prob_table, mix_with_uniform, schedule, Alphabet, FiniteMixture, Measure, Member,
    ModelClass, ModelSpec, ProcessMeasure, Symbol,
};
use crate::report::{fmt_float, to_csv};

/// Slack for inequalities checked in log domain.
pub const LOG_SLACK: f64 = 1e-9;
/// Slack for inequalities between probability masses.
pub const MASS_SLACK: f64 = 1e-12;

/// Horizon, level count and the score range they induce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelParams {
    pub n: usize,
    pub k: usize,
    /// `log₂ A`.
    pub m: f64,
}

impl LevelParams {
    pub fn new(n: usize, k: usize, alphabet: Alphabet) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidParameter(format!(
                "horizon and level count must be positive (n={n}, k={k})"
            )));
        }
        Ok(LevelParams {
            n,
            k,
            m: alphabet.bits_per_symbol(),
        })
    }

    /// `−log₂ n / n`, the closed left end of cell 1.
    pub fn lower(&self) -> f64 {
        -(self.n as f64).log2() / self.n as f64
    }

    /// `M + 1/n`, the closed right end of cell `k`.
    pub fn upper(&self) -> f64 {
        self.m + 1.0 / self.n as f64
    }

    /// Right end of cell `i` (1-based).
    pub fn cell_upper(&self, i: usize) -> f64 {
        if i == self.k {
            self.upper()
        } else {
            i as f64 * self.m / self.k as f64
        }
    }

    /// Cell containing `score`, if any.
    pub fn cell_of(&self, score: f64) -> Option<usize> {
        if !(score >= self.lower() && score <= self.upper()) {
            return None;
        }
        (1..=self.k).find(|&i| score <= self.cell_upper(i))
    }

    /// `μ(x) ≤ 2^{(iM/k)n+1} ρ(x)`, in log form.
    pub fn cops1_holds(&self, i: usize, log_ratio: f64) -> bool {
        log_ratio <= i as f64 * self.m / self.k as f64 * self.n as f64 + 1.0 + LOG_SLACK
    }

    /// `μ(x) ≥ 2^{((i−1)M/k)n − log₂n} ρ(x)`, in log form.
    pub fn cops2_holds(&self, i: usize, log_ratio: f64) -> bool {
        log_ratio
            >= (i - 1) as f64 * self.m / self.k as f64 * self.n as f64
                - (self.n as f64).log2()
                - LOG_SLACK
    }
}

/// The margin `a > M/k` of the dominance argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlackParams {
    pub a: f64,
}

impl SlackParams {
    pub fn new(a: f64, params: &LevelParams) -> Result<Self> {
        let floor = params.m / params.k as f64;
        if !(a.is_finite() && a > floor) {
            return Err(Error::InvalidParameter(format!(
                "margin a = {a} must exceed M/k = {floor}"
            )));
        }
        Ok(SlackParams { a })
    }

    /// `log₂` of `(iM/k + a)n + 1`, the exponent of `l*`.
    pub fn l_star_exponent(&self, params: &LevelParams, i: usize) -> f64 {
        (i as f64 * params.m / params.k as f64 + self.a) * params.n as f64 + 1.0
    }

    /// `⌈2^{(iM/k+a)n+1}⌉`, saturating at `u64::MAX`.
    pub fn l_star(&self, params: &LevelParams, i: usize) -> u64 {
        let e = self.l_star_exponent(params, i);
        if e >= 63.0 {
            u64::MAX
        } else {
            e.exp2().ceil() as u64
        }
    }

    /// `B(n,k,i,a) = −log₂(w_n w_k/k) + 1 + 2 log₂((iM/k+a)n+2) − log₂ w`.
    pub fn constant_b(&self, params: &LevelParams, i: usize) -> f64 {
        let (n, k) = (params.n as u64, params.k as u64);
        let outer = schedule::weight(n) * schedule::weight(k) / k as f64;
        let e = (i as f64 * params.m / params.k as f64 + self.a) * params.n as f64;
        -outer.log2() + 1.0 + 2.0 * (e + 2.0).log2() - schedule::normalizer().log2()
    }

    /// `(a + M/k)n + log₂n + B`, the additive part of the per-sequence bound.
    pub fn bound_rhs(&self, params: &LevelParams, i: usize) -> f64 {
        (self.a + params.m / params.k as f64) * params.n as f64
            + (params.n as f64).log2()
            + self.constant_b(params, i)
    }
}

pub const B_FORMULA: &str = "B(n,k,i,a) = -log2(w_n*w_k/k) + 1 + 2*log2((i*M/k+a)*n+2) - log2(w)";

/// A set of length-`n` sequences as sorted codes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeqSet {
    pub alphabet: Alphabet,
    pub n: usize,
    pub codes: Vec<u32>,
}

impl SeqSet {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn contains(&self, x: &[Symbol]) -> bool {
        x.len() == self.n && self.codes.binary_search(&self.alphabet.encode(x)).is_ok()
    }

    pub fn sequences(&self) -> Vec<Vec<Symbol>> {
        self.codes
            .iter()
            .map(|&c| self.alphabet.decode(c, self.n))
            .collect()
    }
}

/// Log-probability tables of a class and a reference over `X^n`.
pub struct Tables {
    pub alphabet: Alphabet,
    pub n: usize,
    pub rho: Vec<f64>,
    pub members: Vec<Vec<f64>>,
}

impl Tables {
    pub fn build(class: &[Measure], rho: &dyn ProcessMeasure, n: usize, cap: u64) -> Result<Self> {
        let refs: Vec<&dyn ProcessMeasure> = class.iter().map(|m| m.as_ref()).collect();
        Tables::build_refs(&refs, rho, n, cap)
    }

    pub fn build_refs(
        class: &[&dyn ProcessMeasure],
        rho: &dyn ProcessMeasure,
        n: usize,
        cap: u64,
    ) -> Result<Self> {
        if class.is_empty() {
            return Err(Error::EmptyClass);
        }
        let alphabet = rho.alphabet();
        for m in class {
            if m.alphabet() != alphabet {
                return Err(Error::AlphabetMismatch {
                    expected: alphabet.size(),
                    found: m.alphabet().size(),
                });
            }
        }
        let rho_t = log_prob_table(rho, n, cap)?;
        if let Some(code) = rho_t.iter().position(|&l| l == f64::NEG_INFINITY) {
            return Err(Error::Contract(format!(
                "reference {} gives probability zero to {:?}; smooth it with the uniform measure first",
                rho.tag(),
                alphabet.decode(code as u32, n)
            )));
        }
        let members = class
            .par_iter()
            .map(|m| log_prob_table(*m, n, cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tables {
            alphabet,
            n,
            rho: rho_t,
            members,
        })
    }

    fn rho_probs(&self) -> Vec<f64> {
        self.rho.iter().map(|l| l.exp2()).collect()
    }
}

fn likelihood_codes(mu: &[f64], rho: &[f64], n: usize) -> Vec<u32> {
    let threshold = -(n as f64).log2();
    (0..mu.len())
        .filter(|&c| mu[c] - rho[c] >= threshold)
        .map(|c| c as u32)
        .collect()
}

fn mass_outside(mu: &[f64], codes: &[u32]) -> f64 {
    let inside: f64 = codes.iter().map(|&c| mu[c as usize].exp2()).sum();
    let total: f64 = mu.iter().map(|l| l.exp2()).sum();
    (total - inside).max(0.0)
}

/// `{x ∈ X^n : μ(x)/ρ(x) ≥ 1/n}`, with the bound `μ(X^n \ T) ≤ 1/n` checked.
pub fn likelihood_set(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    cap: u64,
) -> Result<SeqSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let t = Tables::build_refs(&[mu], rho, n, cap)?;
    let codes = likelihood_codes(&t.members[0], &t.rho, n);
    let outside = mass_outside(&t.members[0], &codes);
    if outside > 1.0 / n as f64 + MASS_SLACK {
        return Err(Error::Contract(format!(
            "mass outside the likelihood set is {outside}, above 1/n"
        )));
    }
    Ok(SeqSet {
        alphabet: t.alphabet,
        n,
        codes,
    })
}

/// A likelihood set split into its `k` level cells.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelPartition {
    pub owner: String,
    pub params: LevelParams,
    pub likelihood: Vec<u32>,
    /// `cells[i-1]` holds cell `i` with `log₂(μ/ρ)` per code.
    pub cells: Vec<Cell>,
    /// `μ(X^n \ T_μ)`.
    pub outside_mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub i: usize,
    pub codes: Vec<u32>,
    pub log_ratio: Vec<f64>,
}

impl LevelPartition {
    fn build(owner: String, mu: &[f64], rho: &[f64], params: LevelParams) -> Result<Self> {
        let likelihood = likelihood_codes(mu, rho, params.n);
        let mut cells: Vec<Cell> = (1..=params.k)
            .map(|i| Cell {
                i,
                codes: Vec::new(),
                log_ratio: Vec::new(),
            })
            .collect();
        for &c in &likelihood {
            let lr = mu[c as usize] - rho[c as usize];
            let score = lr / params.n as f64;
            let i = params.cell_of(score).ok_or_else(|| {
                Error::Contract(format!(
                    "score {score} of sequence code {c} for {owner} lies outside [{}, {}]; the reference is not bounded",
                    params.lower(),
                    params.upper()
                ))
            })?;
            cells[i - 1].codes.push(c);
            cells[i - 1].log_ratio.push(lr);
        }
        let outside_mass = mass_outside(mu, &likelihood);
        Ok(LevelPartition {
            owner,
            params,
            likelihood,
            cells,
            outside_mass,
        })
    }

    /// Every failed partition property, as text.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut union: Vec<u32> = self
            .cells
            .iter()
            .flat_map(|c| c.codes.iter().copied())
            .collect();
        union.sort_unstable();
        let before = union.len();
        union.dedup();
        if union.len() != before {
            out.push("cells overlap".to_string());
        }
        if union != self.likelihood {
            out.push("cells do not cover the likelihood set".to_string());
        }
        if self.outside_mass > 1.0 / self.params.n as f64 + MASS_SLACK {
            out.push(format!(
                "mass outside the likelihood set {} exceeds 1/n",
                self.outside_mass
            ));
        }
        for cell in &self.cells {
            for (&c, &lr) in cell.codes.iter().zip(&cell.log_ratio) {
                if !self.params.cops1_holds(cell.i, lr) {
                    out.push(format!(
                        "upper cell bound fails for code {c} in cell {}",
                        cell.i
                    ));
                }
                if !self.params.cops2_holds(cell.i, lr) {
                    out.push(format!(
                        "lower cell bound fails for code {c} in cell {}",
                        cell.i
                    ));
                }
            }
        }
        out
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i - 1]
    }
}

/// Builds and checks the level partition of μ against ρ.
pub fn level_partition(
    mu: &dyn ProcessMeasure,
    rho: &dyn ProcessMeasure,
    n: usize,
    k: usize,
    cap: u64,
) -> Result<LevelPartition> {
    let params = LevelParams::new(n, k, rho.alphabet())?;
    let t = Tables::build_refs(&[mu], rho, n, cap)?;
    let p = LevelPartition::build(mu.tag(), &t.members[0], &t.rho, params)?;
    if let Some(v) = p.violations().into_iter().next() {
        return Err(Error::Contract(v));
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyStep {
    /// 1-based step index.
    pub l: usize,
    /// Index of the chosen member in the class.
    pub component: usize,
    /// `m_l`, the ρ-mass this step newly covers.
    pub mass: f64,
    pub new_codes: Vec<u32>,
}

/// Greedy cover of the `i`-th cells of a class.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyCoverResult {
    pub n: usize,
    pub k: usize,
    pub i: usize,
    pub steps: Vec<GreedyStep>,
    /// `L*`, the first step whose best gain is zero.
    pub terminated_at: usize,
}

impl GreedyCoverResult {
    fn run(cells: &[&[u32]], rho_p: &[f64], n: usize, k: usize, i: usize) -> Self {
        let mut covered = vec![false; rho_p.len()];
        let mut steps = Vec::new();
        loop {
            let mut best = 0usize;
            let mut best_mass = -1.0;
            for (j, cell) in cells.iter().enumerate() {
                let mass: f64 = cell
                    .iter()
                    .filter(|&&c| !covered[c as usize])
                    .map(|&c| rho_p[c as usize])
                    .sum();
                if mass > best_mass {
                    best = j;
                    best_mass = mass;
                }
            }
            if best_mass <= 0.0 {
                break;
            }
            let new_codes: Vec<u32> = cells[best]
                .iter()
                .copied()
                .filter(|&c| !covered[c as usize])
                .collect();
            for &c in &new_codes {
                covered[c as usize] = true;
            }
            steps.push(GreedyStep {
                l: steps.len() + 1,
                component: best,
                mass: best_mass,
                new_codes,
            });
        }
        let terminated_at = steps.len() + 1;
        GreedyCoverResult {
            n,
            k,
            i,
            steps,
            terminated_at,
        }
    }

    /// Components in step order.
    pub fn picks(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.component).collect()
    }

    /// `m_l`, zero from `L*` on.
    pub fn mass_at(&self, l: usize) -> f64 {
        self.steps.get(l - 1).map_or(0.0, |s| s.mass)
    }

    /// Step at which each code was covered, sorted by code.
    pub fn covered_at(&self) -> Vec<(u32, usize)> {
        let mut v: Vec<(u32, usize)> = self
            .steps
            .iter()
            .flat_map(|s| s.new_codes.iter().map(move |&c| (c, s.l)))
            .collect();
        v.sort_unstable();
        v
    }

    /// Failed greedy invariants, recomputed from the recorded steps.
    pub fn violations(&self, cells: &[&[u32]], rho_p: &[f64]) -> Vec<String> {
        let mut out = Vec::new();
        let mut covered = vec![false; rho_p.len()];
        for l in 0..=self.steps.len() {
            if l > 0 {
                let s = &self.steps[l - 1];
                if l >= 2 && s.mass > self.steps[l - 2].mass + MASS_SLACK {
                    out.push(format!("greedy mass increases at step {l}"));
                }
                if s.mass > 1.0 / l as f64 + MASS_SLACK {
                    out.push(format!("greedy mass {} at step {l} exceeds 1/l", s.mass));
                }
                for &c in &s.new_codes {
                    if covered[c as usize] {
                        out.push(format!("code {c} covered twice"));
                    }
                    covered[c as usize] = true;
                }
            }
            let next = self.mass_at(l + 1);
            for (j, cell) in cells.iter().enumerate() {
                let residual: f64 = cell
                    .iter()
                    .filter(|&&c| !covered[c as usize])
                    .map(|&c| rho_p[c as usize])
                    .sum();
                if residual > next + MASS_SLACK {
                    out.push(format!(
                        "residual {residual} of member {j} after step {l} exceeds m_{} = {next}",
                        l + 1
                    ));
                }
                if l > 0 && residual > 1.0 / l as f64 + MASS_SLACK {
                    out.push(format!(
                        "residual {residual} of member {j} after step {l} exceeds 1/l"
                    ));
                }
            }
        }
        out
    }
}

/// Everything computed at one grid point `(n, k)`.
pub struct Analysis {
    pub params: LevelParams,
    pub tables: Tables,
    pub partitions: Vec<LevelPartition>,
    /// `covers[i-1]` is the greedy cover of cell `i`.
    pub covers: Vec<GreedyCoverResult>,
}

impl Analysis {
    pub fn run(
        class: &[Measure],
        rho: &dyn ProcessMeasure,
        n: usize,
        k: usize,
        cap: u64,
    ) -> Result<Self> {
        let params = LevelParams::new(n, k, rho.alphabet())?;
        let tables = Tables::build(class, rho, n, cap)?;
        let partitions = class
            .par_iter()
            .zip(&tables.members)
            .map(|(m, t)| LevelPartition::build(m.tag(), t, &tables.rho, params))
            .collect::<Result<Vec<_>>>()?;
        let rho_p = tables.rho_probs();
        let covers = (1..=k)
            .map(|i| {
                let cells: Vec<&[u32]> = partitions
                    .iter()
                    .map(|p| p.cell(i).codes.as_slice())
                    .collect();
                GreedyCoverResult::run(&cells, &rho_p, n, k, i)
            })
            .collect();
        Ok(Analysis {
            params,
            tables,
            partitions,
            covers,
        })
    }

    pub fn cells(&self, i: usize) -> Vec<&[u32]> {
        self.partitions
            .iter()
            .map(|p| p.cell(i).codes.as_slice())
            .collect()
    }

    /// Every failed partition and greedy property.
    pub fn violations(&self) -> Vec<String> {
        let rho_p = self.tables.rho_probs();
        let mut out: Vec<String> = self
            .partitions
            .iter()
            .flat_map(|p| {
                p.violations()
                    .into_iter()
                    .map(move |v| format!("{}: {v}", p.owner))
            })
            .collect();
        for c in &self.covers {
            out.extend(
                c.violations(&self.cells(c.i), &rho_p)
                    .into_iter()
                    .map(|v| format!("cell {}: {v}", c.i)),
            );
        }
        out
    }
}

/// Greedy cover of cell `i` over a class.
pub fn greedy_cover(
    class: &[Measure],
    rho: &dyn ProcessMeasure,
    n: usize,
    k: usize,
    i: usize,
    cap: u64,
) -> Result<GreedyCoverResult> {
    if !(1..=k).contains(&i) {
        return Err(Error::InvalidParameter(format!(
            "cell index {i} outside 1..={k}"
        )));
    }
    let a = Analysis::run(class, rho, n, k, cap)?;
    if let Some(v) = a.violations().into_iter().next() {
        return Err(Error::Contract(v));
    }
    Ok(a.covers.into_iter().nth(i - 1).expect("cell exists"))
}

/// The steps of one cell mixture `ν_{n,k,i} = Σ_l w_l μ_l`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellMixture {
    pub n: usize,
    pub k: usize,
    pub i: usize,
    /// `(l, component, m_l)` per realized step.
    pub steps: Vec<(usize, usize, f64)>,
}

/// The mixture extracted from a class, before uniform smoothing, with the
/// greedy provenance of every component.
#[derive(Clone, Debug)]
pub struct ExtractedMixture {
    pub grid: Vec<(usize, usize)>,
    pub cells: Vec<CellMixture>,
    /// `(component, weight)`, sorted by component, summing to one.
    pub weights: Vec<(usize, f64)>,
    pub ids: Vec<String>,
    components: Vec<Measure>,
}

fn default_ids(class: &[Measure]) -> Vec<String> {
    let tags: Vec<String> = class.iter().map(|m| m.tag()).collect();
    tags.iter()
        .enumerate()
        .map(|(j, t)| {
            if tags.iter().filter(|u| *u == t).count() > 1 {
                format!("{t}#{j}")
            } else {
                t.clone()
            }
        })
        .collect()
}

impl ExtractedMixture {
    fn from_analyses(class: &[Measure], analyses: &[Analysis]) -> Result<Self> {
        let mut cells = Vec::new();
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for a in analyses {
            let (n, k) = (a.params.n, a.params.k);
            let outer = schedule::weight(n as u64) * schedule::weight(k as u64) / k as f64;
            for cover in &a.covers {
                if cover.steps.is_empty() {
                    continue;
                }
                let z: f64 = cover
                    .steps
                    .iter()
                    .map(|s| schedule::weight(s.l as u64))
                    .sum();
                for s in &cover.steps {
                    *acc.entry(s.component).or_insert(0.0) +=
                        outer * schedule::weight(s.l as u64) / z;
                }
                cells.push(CellMixture {
                    n,
                    k,
                    i: cover.i,
                    steps: cover
                        .steps
                        .iter()
                        .map(|s| (s.l, s.component, s.mass))
                        .collect(),
                });
            }
        }
        let total: f64 = acc.values().sum();
        if !(total > 0.0) {
            return Err(Error::Contract("greedy cover selected no component".into()));
        }
        Ok(ExtractedMixture {
            grid: analyses.iter().map(|a| (a.params.n, a.params.k)).collect(),
            cells,
            weights: acc.into_iter().map(|(c, w)| (c, w / total)).collect(),
            ids: default_ids(class),
            components: class.to_vec(),
        })
    }

    pub fn weight_of(&self, component: usize) -> f64 {
        self.weights
            .iter()
            .find(|(c, _)| *c == component)
            .map_or(0.0, |(_, w)| *w)
    }

    /// ν before smoothing.
    pub fn mixture(&self) -> Result<FiniteMixture> {
        FiniteMixture::new(
            self.weights
                .iter()
                .map(|&(c, w)| (w, self.components[c].clone()))
                .collect(),
        )
    }

    /// `½ ν + ½ uniform`.
    pub fn to_measure(&self) -> Result<Measure> {
        Ok(Arc::new(mix_with_uniform(self.mixture()?.into_measure())))
    }

    pub fn to_spec(&self) -> Result<ModelSpec> {
        let member = self
            .weights
            .iter()
            .map(|&(c, w)| {
                let model = self.components[c].spec().ok_or_else(|| {
                    Error::Document(format!("{} has no document form", self.components[c].tag()))
                })?;
                Ok(Member {
                    id: Some(self.ids[c].clone()),
                    weight: Some(w),
                    model,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelSpec::Smoothed {
            inner: Box::new(ModelSpec::Mixture { member }),
        })
    }

    /// A one-member class document holding the smoothed mixture.
    pub fn to_document(&self, name: Option<String>) -> Result<ModelClass> {
        let mut doc = ModelClass::new(name, self.components[0].alphabet());
        doc.member.push(Member {
            id: Some("extracted".into()),
            weight: None,
            model: self.to_spec()?,
        });
        Ok(doc)
    }

    /// Columns `n, k, i, l, component, mass`.
    pub fn provenance_csv(&self) -> Result<String> {
        let rows = self.cells.iter().flat_map(|c| {
            c.steps.iter().map(move |&(l, comp, m)| {
                vec![
                    c.n.to_string(),
                    c.k.to_string(),
                    c.i.to_string(),
                    l.to_string(),
                    self.ids[comp].clone(),
                    fmt_float(m),
                ]
            })
        });
        to_csv(&["n", "k", "i", "l", "component", "mass"], rows)
    }
}

/// Runs the construction over every `(n, k)` in `grid`.
pub fn assemble(
    class: &[Measure],
    rho: &dyn ProcessMeasure,
    grid: &[(usize, usize)],
    cap: u64,
) -> Result<ExtractedMixture> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid must not be empty".into()));
    }
    let analyses = grid
        .iter()
        .map(|&(n, k)| {
            let a = Analysis::run(class, rho, n, k, cap)?;
            if let Some(v) = a.violations().into_iter().next() {
                return Err(Error::Contract(v));
            }
            Ok(a)
        })
        .collect::<Result<Vec<_>>>()?;
    ExtractedMixture::from_analyses(class, &analyses)
}

/// `φ = Σ_j w_j ν_j` over several references, `w_j` from the schedule.
pub struct PhiMixture {
    pub parts: Vec<ExtractedMixture>,
    pub weights: Vec<f64>,
}

impl PhiMixture {
    pub fn to_measure(&self) -> Result<Measure> {
        if self.parts.len() == 1 {
            return self.parts[0].to_measure();
        }
        let parts = self
            .parts
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| Ok((w, p.to_measure()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteMixture::new(parts)?.into_measure())
    }

    pub fn to_document(&self, name: Option<String>) -> Result<ModelClass> {
        let mut doc = ModelClass::new(name, self.parts[0].components[0].alphabet());
        for (j, (p, &w)) in self.parts.iter().zip(&self.weights).enumerate() {
            doc.member.push(Member {
                id: Some(format!("reference-{}", j + 1)),
                weight: Some(w),
                model: p.to_spec()?,
            });
        }
        Ok(doc)
    }
}

pub fn assemble_phi(
    class: &[Measure],
    refs: &[Measure],
    grid: &[(usize, usize)],
    cap: u64,
) -> Result<PhiMixture> {
    if refs.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one reference is required".into(),
        ));
    }
    let parts = refs
        .iter()
        .map(|r| assemble(class, r.as_ref(), grid, cap))
        .collect::<Result<Vec<_>>>()?;
    let raw: Vec<f64> = (1..=refs.len() as u64).map(schedule::weight).collect();
    let z: f64 = raw.iter().sum();
    Ok(PhiMixture {
        parts,
        weights: raw.iter().map(|w| w / z).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub mu_id: String,
    pub cell_i: usize,
    pub cell_size: usize,
    pub covered_mass: f64,
    pub exceptional_mass: f64,
    /// `2^{−an+1}`.
    pub exceptional_bound: f64,
    /// `(a + M/k)n + log₂n + B(n,k,i,a)`.
    pub bound_rhs_bits: f64,
    /// `max_x [−log₂ν(x) − (−log₂ρ(x) + bound_rhs_bits)]` over covered `x`.
    pub max_violation_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeadlineRow {
    pub mu_id: String,
    pub dn_nu_bits: f64,
    pub dn_rho_bits: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditViolation {
    pub mu_id: String,
    pub cell: usize,
    pub sequence: Option<Vec<Symbol>>,
    pub detail: String,
}

/// Outcome of [`dominance_audit`].
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub n: usize,
    pub k: usize,
    pub a: f64,
    pub formula: &'static str,
    pub rows: Vec<AuditRow>,
    pub headline: Vec<HeadlineRow>,
    /// `max_μ d_n(μ,ρ) + (a+M/k)n + log₂n + B(n,k,k,a)`.
    pub headline_bound: f64,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub const CSV_HEADER: [&'static str; 6] = [
        "mu_id",
        "cell_i",
        "covered_mass",
        "exceptional_mass",
        "bound_rhs_bits",
        "max_violation_bits",
    ];

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::AuditFailed {
                mu: v.mu_id.clone(),
                cell: v.cell,
                detail: match &v.sequence {
                    Some(x) => format!("{} (x = {})", v.detail, seq_string(x)),
                    None => v.detail.clone(),
                },
            }),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        to_csv(
            &Self::CSV_HEADER,
            self.rows.iter().map(|r| {
                vec![
                    r.mu_id.clone(),
                    r.cell_i.to_string(),
                    fmt_float(r.covered_mass),
                    fmt_float(r.exceptional_mass),
                    fmt_float(r.bound_rhs_bits),
                    fmt_float(r.max_violation_bits),
                ]
            }),
        )
    }

    pub fn headline_csv(&self) -> Result<String> {
        to_csv(
            &["mu_id", "dn_nu_bits", "dn_rho_bits"],
            self.headline.iter().map(|h| {
                vec![
                    h.mu_id.clone(),
                    fmt_float(h.dn_nu_bits),
                    fmt_float(h.dn_rho_bits),
                ]
            }),
        )
    }

    pub fn max_dn_nu(&self) -> f64 {
        self.headline
            .iter()
            .map(|h| h.dn_nu_bits)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_dn_rho(&self) -> f64 {
        self.headline
            .iter()
            .map(|h| h.dn_rho_bits)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn seq_string(x: &[Symbol]) -> String {
    x.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("")
}

fn dn_from_tables(mu: &[f64], other: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&lm, &lo) in mu.iter().zip(other) {
        if lm == f64::NEG_INFINITY {
            continue;
        }
        if lo == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        d += lm.exp2() * (lm - lo);
    }
    d.max(0.0)
}

/// Checks, sequence by sequence, the inequalities behind the extracted
/// mixture at grid point `(n, k)`:
///
/// * every partition and greedy property;
/// * for each member μ and cell `i`, with `l = min(l*, L*)`: the μ-mass of
///   the cell left uncovered after step `l` is at most `2^{−an+1}`;
/// * for every covered `x`: `−log₂ν(x) ≤ −log₂ρ(x) + (a+M/k)n + log₂n + B`;
/// * `max_μ d_n(μ,ν) ≤ max_μ d_n(μ,ρ) + (a+M/k)n + log₂n + B(n,k,k,a)`.
///
/// `ν` is the smoothed measure of `extracted`.
pub fn dominance_audit(
    class: &[Measure],
    rho: &dyn ProcessMeasure,
    extracted: &ExtractedMixture,
    n: usize,
    k: usize,
    slack: SlackParams,
    cap: u64,
) -> Result<AuditReport> {
    if !extracted.grid.contains(&(n, k)) {
        return Err(Error::Contract(format!(
            "grid point ({n}, {k}) was not part of the extraction"
        )));
    }
    let analysis = Analysis::run(class, rho, n, k, cap)?;
    for cover in &analysis.covers {
        let recorded = extracted
            .cells
            .iter()
            .find(|c| (c.n, c.k, c.i) == (n, k, cover.i));
        let picks: Vec<usize> =
            recorded.map_or_else(Vec::new, |c| c.steps.iter().map(|s| s.1).collect());
        if picks != cover.picks() {
            return Err(Error::Contract(format!(
                "extracted mixture does not match this class and reference at cell {}",
                cover.i
            )));
        }
    }
    let params = analysis.params;
    let a = slack.a;
    let nu = extracted.to_measure()?;
    let nu_t = log_prob_table(nu.as_ref(), n, cap)?;
    let t = &analysis.tables;
    let ids = &extracted.ids;

    let mut violations: Vec<AuditViolation> = analysis
        .violations()
        .into_iter()
        .map(|detail| AuditViolation {
            mu_id: String::new(),
            cell: 0,
            sequence: None,
            detail,
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..class.len())
        .flat_map(|j| (1..=k).map(move |i| (j, i)))
        .collect();
    let results: Vec<(AuditRow, Vec<AuditViolation>)> = jobs
        .par_iter()
        .map(|&(j, i)| {
            let cover = &analysis.covers[i - 1];
            let l_use = slack.l_star(&params, i).min(cover.terminated_at as u64) as usize;
            let covered_at = cover.covered_at();
            let cell = analysis.partitions[j].cell(i);
            let rhs = slack.bound_rhs(&params, i);
            let bound = (1.0 - a * n as f64).exp2();
            let mu = &t.members[j];
            let mut covered_mass = 0.0;
            let mut exceptional_mass = 0.0;
            let mut worst = f64::NEG_INFINITY;
            let mut bad = Vec::new();
            for &c in &cell.codes {
                let step = covered_at
                    .binary_search_by_key(&c, |e| e.0)
                    .ok()
                    .map(|p| covered_at[p].1);
                let p = mu[c as usize].exp2();
                if step.is_some_and(|s| s <= l_use) {
                    covered_mass += p;
                    let excess = -nu_t[c as usize] - (-t.rho[c as usize] + rhs);
                    worst = worst.max(excess);
                    if excess > LOG_SLACK {
                        bad.push(AuditViolation {
                            mu_id: ids[j].clone(),
                            cell: i,
                            sequence: Some(t.alphabet.decode(c, n)),
                            detail: format!("per-sequence bound exceeded by {excess} bits"),
                        });
                    }
                } else {
                    exceptional_mass += p;
                }
            }
            if exceptional_mass > bound + MASS_SLACK {
                bad.push(AuditViolation {
                    mu_id: ids[j].clone(),
                    cell: i,
                    sequence: None,
                    detail: format!(
                        "exceptional mass {exceptional_mass} exceeds 2^(-an+1) = {bound}"
                    ),
                });
            }
            let row = AuditRow {
                mu_id: ids[j].clone(),
                cell_i: i,
                cell_size: cell.codes.len(),
                covered_mass,
                exceptional_mass,
                exceptional_bound: bound,
                bound_rhs_bits: rhs,
                max_violation_bits: worst,
            };
            (row, bad)
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for (row, bad) in results {
        rows.push(row);
        violations.extend(bad);
    }

    let headline: Vec<HeadlineRow> = t
        .members
        .iter()
        .enumerate()
        .map(|(j, mu)| HeadlineRow {
            mu_id: ids[j].clone(),
            dn_nu_bits: dn_from_tables(mu, &nu_t),
            dn_rho_bits: dn_from_tables(mu, &t.rho),
        })
        .collect();
    let max_rho = headline
        .iter()
        .map(|h| h.dn_rho_bits)
        .fold(f64::NEG_INFINITY, f64::max);
    let headline_bound = max_rho + slack.bound_rhs(&params, k);
    let max_nu = headline
        .iter()
        .map(|h| h.dn_nu_bits)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_nu > headline_bound + LOG_SLACK {
        violations.push(AuditViolation {
            mu_id: "class".into(),
            cell: k,
            sequence: None,
            detail: format!("worst-case loss {max_nu} exceeds {headline_bound}"),
        });
    }
    Ok(AuditReport {
        n,
        k,
        a,
        formula: B_FORMULA,
        rows,
        headline,
        headline_bound,
        violations,
    })
}
