//! Subcommands. Each one validates its whole configuration into a plan
//! before computing anything, then returns its output files in memory.

use std::path::PathBuf;
use std::time::Instant;

use bayesmix_core::cover::{assemble_phi, dominance_audit, SlackParams};
use bayesmix_core::families::{
    changepoint_value, gen_changepoint, switch_prior_budget, SwitchingKt, TypicalMixture,
};
use bayesmix_core::loss::{dn_auto, dp_dn_iid, exact_dn, mc_dn, EvalOptions, LossReport};
use bayesmix_core::measures::Stepper;
use bayesmix_core::minimax::{capacity_with, CapacityOptions, CapacityResult, MinimaxGap};
use bayesmix_core::report::{fmt_float, to_csv};
use bayesmix_core::{Alphabet, Kt, Measure, ProcessMeasure, Symbol};

use crate::config::{
    check_audit, check_horizons, check_tolerance, AuditConfig, CapacityConfig, ChangepointConfig,
    EvalLossConfig, ExtractConfig, LoadedClass, MethodChoice, TypicalConfig,
};
use crate::error::{CliError, CliResult};

/// Settings shared by every subcommand after flag and config merging.
pub struct Context {
    pub base: PathBuf,
    pub seed: u64,
    pub tolerance: f64,
}

pub struct Output {
    pub path: String,
    pub body: String,
}

/// Files and timings of one run. `failure` is set when the computation
/// finished but a checked inequality did not hold.
#[derive(Default)]
pub struct RunResult {
    pub outputs: Vec<Output>,
    pub timings: Vec<(String, f64)>,
    pub failure: Option<CliError>,
}

impl RunResult {
    fn file(&mut self, path: impl Into<String>, body: String) {
        self.outputs.push(Output {
            path: path.into(),
            body,
        });
    }

    fn timed<T>(&mut self, op: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push((op.into(), t.elapsed().as_secs_f64()));
        out
    }
}

fn header(prefix: &[&str], rest: &[&str]) -> Vec<String> {
    prefix.iter().chain(rest).map(|s| s.to_string()).collect()
}

fn csv_with(head: Vec<String>, rows: Vec<Vec<String>>) -> CliResult<String> {
    let h: Vec<&str> = head.iter().map(|s| s.as_str()).collect();
    Ok(to_csv(&h, rows)?)
}

// ---------------------------------------------------------------- eval-loss

struct LossJob {
    mu_id: String,
    rho_id: String,
    mu: Measure,
    rho: Measure,
}

pub struct EvalLossPlan {
    cfg: EvalLossConfig,
    jobs: Vec<LossJob>,
    opts: EvalOptions,
}

pub fn plan_eval_loss(cfg: &EvalLossConfig, ctx: &Context) -> CliResult<EvalLossPlan> {
    let alphabet = Alphabet::new(cfg.alphabet)?;
    check_horizons(&cfg.horizons)?;
    if cfg.pair.is_empty() {
        return Err(CliError::config(
            "eval-loss needs at least one [[eval-loss.pair]]",
        ));
    }
    if cfg.samples < 2 {
        return Err(CliError::config("samples must be at least 2"));
    }
    let mut jobs = Vec::new();
    for (idx, p) in cfg.pair.iter().enumerate() {
        let ctx_err = |e: CliError| e.context(format!("pair {}", idx + 1));
        let rho = p.rho.build(alphabet).map_err(|e| ctx_err(e.into()))?;
        let rho_id = p.rho_id.clone().unwrap_or_else(|| rho.tag());
        let mus: Vec<(String, Measure)> = match (&p.mu, &p.mu_class) {
            (Some(spec), None) => {
                let m = spec.build(alphabet).map_err(|e| ctx_err(e.into()))?;
                vec![(m.tag(), m)]
            }
            (None, Some(class)) => {
                let c = class.load(&ctx.base, "mu-class").map_err(ctx_err)?;
                if c.document.alphabet != alphabet {
                    return Err(ctx_err(CliError::config(
                        "mu-class alphabet differs from eval-loss alphabet",
                    )));
                }
                c.ids.into_iter().zip(c.members).collect()
            }
            _ => {
                return Err(ctx_err(CliError::config(
                    "give exactly one of mu, mu-class",
                )))
            }
        };
        for (mu_id, mu) in mus {
            if cfg.method == MethodChoice::Dp {
                let counts = vec![0; alphabet.size()];
                if mu.iid_theta().is_none() || rho.cond_from_counts(&counts).is_none() {
                    return Err(ctx_err(CliError::config(format!(
                        "method dp needs an i.i.d. μ and a count-sufficient ρ ({mu_id} vs {rho_id})"
                    ))));
                }
            }
            jobs.push(LossJob {
                mu_id,
                rho_id: rho_id.clone(),
                mu,
                rho: rho.clone(),
            });
        }
    }
    Ok(EvalLossPlan {
        cfg: cfg.clone(),
        jobs,
        opts: EvalOptions {
            cap: cfg.cap,
            mc_samples: cfg.samples,
            seed: ctx.seed,
        },
    })
}

fn eval_one(plan: &EvalLossPlan, job: &LossJob, n: usize) -> CliResult<LossReport> {
    let (mu, rho) = (job.mu.as_ref(), job.rho.as_ref());
    Ok(match plan.cfg.method {
        MethodChoice::Auto => dn_auto(mu, rho, n, &plan.opts)?,
        MethodChoice::Exact => exact_dn(mu, rho, n, plan.opts.cap)?,
        MethodChoice::Dp => dp_dn_iid(&mu.iid_theta().expect("validated"), rho, n)?,
        MethodChoice::MonteCarlo => mc_dn(mu, rho, n, plan.opts.mc_samples, plan.opts.seed)?,
    })
}

pub fn run_eval_loss(plan: &EvalLossPlan) -> CliResult<RunResult> {
    let mut res = RunResult::default();
    let mut rows = Vec::new();
    for job in &plan.jobs {
        for &n in &plan.cfg.horizons {
            let r = res
                .timed(format!("d_n {} vs {} n={n}", job.mu_id, job.rho_id), || {
                    eval_one(plan, job, n)
                })
                .map_err(|e| e.context(format!("{} vs {} at n={n}", job.mu_id, job.rho_id)))?;
            let mut row = vec![job.mu_id.clone(), job.rho_id.clone()];
            row.extend(r.csv_record());
            rows.push(row);
        }
    }
    res.file(
        "loss.csv",
        csv_with(header(&["mu_id", "rho_id"], &LossReport::CSV_HEADER), rows)?,
    );
    Ok(res)
}

// ------------------------------------------------------------------ extract

pub struct ExtractPlan {
    cfg: ExtractConfig,
    class: LoadedClass,
    refs: Vec<Measure>,
    audits: Vec<(AuditConfig, SlackParams)>,
}

pub fn plan_extract(cfg: &ExtractConfig, ctx: &Context) -> CliResult<ExtractPlan> {
    let class = cfg.class.load(&ctx.base, "class")?;
    let alphabet = class.document.alphabet;
    if cfg.reference.is_empty() {
        return Err(CliError::config("extract needs at least one reference"));
    }
    let refs = cfg
        .reference
        .iter()
        .map(|r| r.build(alphabet).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    if cfg.grid.is_empty() {
        return Err(CliError::config("grid must not be empty"));
    }
    for &(n, k) in &cfg.grid {
        bayesmix_core::cover::LevelParams::new(n, k, alphabet)?;
        alphabet.check_cap(n, cfg.cap, "extract grid point")?;
    }
    let audits = cfg
        .audit
        .iter()
        .map(|a| Ok((*a, check_audit(a, &cfg.grid, alphabet)?)))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ExtractPlan {
        cfg: cfg.clone(),
        class,
        refs,
        audits,
    })
}

fn tables_dn(
    mu: &dyn ProcessMeasure,
    other: &dyn ProcessMeasure,
    n: usize,
    cap: u64,
) -> CliResult<f64> {
    Ok(exact_dn(mu, other, n, cap)?.dn)
}

pub fn run_extract(plan: &ExtractPlan) -> CliResult<RunResult> {
    let mut res = RunResult::default();
    let members = &plan.class.members;
    let cap = plan.cfg.cap;
    let mut phi = res.timed("assemble", || {
        assemble_phi(members, &plan.refs, &plan.cfg.grid, cap)
    })?;
    for part in &mut phi.parts {
        part.ids = plan.class.ids.clone();
    }
    let phi_m = phi.to_measure()?;
    let doc = phi.to_document(Some(format!("extracted-{}", plan.class.id)))?;
    res.file("mixture.toml", doc.to_toml_string()?);

    let mut prov = Vec::new();
    for (j, part) in phi.parts.iter().enumerate() {
        for c in &part.cells {
            for &(l, comp, m) in &c.steps {
                prov.push(vec![
                    (j + 1).to_string(),
                    c.n.to_string(),
                    c.k.to_string(),
                    c.i.to_string(),
                    l.to_string(),
                    plan.class.ids[comp].clone(),
                    fmt_float(m),
                ]);
            }
        }
    }
    res.file(
        "provenance.csv",
        csv_with(
            header(&["reference", "n", "k", "i", "l", "component", "mass"], &[]),
            prov,
        )?,
    );

    let mut audit_rows = Vec::new();
    let mut head_rows = Vec::new();
    let mut failure: Option<CliError> = None;
    for (j, rho) in plan.refs.iter().enumerate() {
        let weight_cost = -phi.weights[j].log2();
        for (a, slack) in &plan.audits {
            let label = format!("audit reference {} n={} k={} a={}", j + 1, a.n, a.k, a.a);
            let report = res.timed(label.clone(), || {
                dominance_audit(members, rho.as_ref(), &phi.parts[j], a.n, a.k, *slack, cap)
            })?;
            let prefix = vec![
                (j + 1).to_string(),
                a.n.to_string(),
                a.k.to_string(),
                fmt_float(a.a),
            ];
            for r in &report.rows {
                let mut row = prefix.clone();
                row.extend([
                    r.mu_id.clone(),
                    r.cell_i.to_string(),
                    fmt_float(r.covered_mass),
                    fmt_float(r.exceptional_mass),
                    fmt_float(r.bound_rhs_bits),
                    fmt_float(r.max_violation_bits),
                ]);
                audit_rows.push(row);
            }
            let phi_bound = report.headline_bound + weight_cost;
            let mut max_phi = f64::NEG_INFINITY;
            for (h, mu) in report.headline.iter().zip(members) {
                let dn_phi = tables_dn(mu.as_ref(), phi_m.as_ref(), a.n, cap)?;
                max_phi = max_phi.max(dn_phi);
                let mut row = prefix.clone();
                row.extend([
                    h.mu_id.clone(),
                    fmt_float(h.dn_nu_bits),
                    fmt_float(dn_phi),
                    fmt_float(h.dn_rho_bits),
                ]);
                head_rows.push(row);
            }
            let mut summary = prefix.clone();
            summary.extend([
                "max".to_string(),
                fmt_float(report.max_dn_nu()),
                fmt_float(max_phi),
                fmt_float(report.max_dn_rho()),
            ]);
            head_rows.push(summary);
            if failure.is_none() {
                if let Err(e) = report.into_result() {
                    failure = Some(CliError::from(e).context(label.clone()));
                } else if max_phi > phi_bound + bayesmix_core::cover::LOG_SLACK {
                    failure = Some(CliError::contract(format!(
                        "{label}: max d_n(μ, φ) = {max_phi} exceeds {phi_bound}"
                    )));
                }
            }
        }
    }
    if !plan.audits.is_empty() {
        res.file(
            "audit.csv",
            csv_with(
                header(
                    &["reference", "n", "k", "a"],
                    &bayesmix_core::cover::AuditReport::CSV_HEADER,
                ),
                audit_rows,
            )?,
        );
        res.file(
            "headline.csv",
            csv_with(
                header(
                    &["reference", "n", "k", "a"],
                    &["mu_id", "dn_nu_bits", "dn_phi_bits", "dn_rho_bits"],
                ),
                head_rows,
            )?,
        );
    }
    res.failure = failure;
    Ok(res)
}

// ----------------------------------------------------------------- capacity

pub struct CapacityPlan {
    cfg: CapacityConfig,
    classes: Vec<LoadedClass>,
    opts: CapacityOptions,
}

pub fn plan_capacity(cfg: &CapacityConfig, ctx: &Context) -> CliResult<CapacityPlan> {
    check_horizons(&cfg.horizons)?;
    let tol = check_tolerance(cfg.tolerance.unwrap_or(ctx.tolerance))?;
    if cfg.class.is_empty() {
        return Err(CliError::config(
            "capacity needs at least one [[capacity.class]]",
        ));
    }
    let classes = cfg
        .class
        .iter()
        .enumerate()
        .map(|(i, c)| c.load(&ctx.base, &format!("class-{}", i + 1)))
        .collect::<CliResult<Vec<_>>>()?;
    for (i, c) in classes.iter().enumerate() {
        if classes[..i].iter().any(|d| d.id == c.id) {
            return Err(CliError::config(format!("duplicate class id {}", c.id)));
        }
        for &n in &cfg.horizons {
            let joint = c
                .document
                .alphabet
                .count(n)
                .saturating_mul(c.members.len() as u128);
            if joint > cfg.cap as u128 {
                return Err(bayesmix_core::Error::CapExceeded {
                    what: "capacity joint table",
                    required: joint,
                    cap: cfg.cap as u128,
                }
                .into());
            }
        }
    }
    Ok(CapacityPlan {
        cfg: cfg.clone(),
        classes,
        opts: CapacityOptions {
            tol,
            max_iter: cfg.max_iter,
            cap: cfg.cap,
        },
    })
}

pub fn run_capacity(plan: &CapacityPlan) -> CliResult<RunResult> {
    let mut res = RunResult::default();
    let mut rows: Vec<(String, CapacityResult)> = Vec::new();
    let mut sandwich = Vec::new();
    for c in &plan.classes {
        for &n in &plan.cfg.horizons {
            let r = res.timed(format!("capacity {} n={n}", c.id), || {
                capacity_with(&c.members, n, &plan.opts)
            })?;
            sandwich.push(vec![
                c.id.clone(),
                n.to_string(),
                fmt_float(r.lower),
                fmt_float(r.upper),
                fmt_float(r.gap),
                r.converged.to_string(),
                MinimaxGap::NOTE.to_string(),
            ]);
            let prior = r.prior_document(&c.document)?;
            res.file(
                format!("priors/{}-n{n}.toml", c.id),
                prior.to_toml_string()?,
            );
            rows.push((c.id.clone(), r));
        }
    }
    res.file("capacity.csv", bayesmix_core::minimax::capacity_csv(&rows)?);
    res.file(
        "sandwich.csv",
        csv_with(
            header(
                &[
                    "class_id",
                    "n",
                    "lower",
                    "upper",
                    "gap",
                    "converged",
                    "note",
                ],
                &[],
            ),
            sandwich,
        )?,
    );
    Ok(res)
}

// -------------------------------------------------------------- changepoint

pub struct ChangepointPlan {
    cfg: ChangepointConfig,
    predictor: SwitchingKt,
    seeds: Vec<u64>,
    value: f64,
}

pub fn plan_changepoint(cfg: &ChangepointConfig, ctx: &Context) -> CliResult<ChangepointPlan> {
    cfg.source.validate()?;
    let alpha_hat = match cfg.alpha_hat {
        Some(a) => a,
        None if cfg.source.alpha > 0.0 => cfg.source.alpha,
        None => 1.0 / cfg.source.n.max(2) as f64,
    };
    let predictor = SwitchingKt::new(Alphabet::BINARY, alpha_hat)?;
    if cfg.stride == 0 {
        return Err(CliError::config("stride must be positive"));
    }
    if !(cfg.slack >= 0.0) {
        return Err(CliError::config("slack must be non-negative"));
    }
    let seeds = cfg.seeds.clone().unwrap_or_else(|| vec![ctx.seed]);
    if seeds.is_empty() {
        return Err(CliError::config("seeds must not be empty"));
    }
    let value = if cfg.source.alpha == 0.0 {
        0.0
    } else {
        changepoint_value(cfg.source.alpha)?
    };
    Ok(ChangepointPlan {
        cfg: cfg.clone(),
        predictor,
        seeds,
        value,
    })
}

/// Per-step code lengths of KT restarted at each change time.
fn restart_steps(x: &[Symbol], change_times: &[usize]) -> Vec<f64> {
    let kt = Kt::new(Alphabet::BINARY);
    let mut s: Box<dyn Stepper> = kt.stepper();
    let mut changes = change_times.iter().peekable();
    x.iter()
        .enumerate()
        .map(|(t, &b)| {
            if changes.peek() == Some(&&t) {
                changes.next();
                s = kt.stepper();
            }
            let bits = -s.cond()[b as usize].log2();
            s.advance(b);
            bits
        })
        .collect()
}

pub fn run_changepoint(plan: &ChangepointPlan) -> CliResult<RunResult> {
    let mut res = RunResult::default();
    let alpha_hat = plan.predictor.alpha_hat();
    let mut rows = Vec::new();
    for &seed in &plan.seeds {
        let trace = res.timed(format!("generate seed {seed}"), || {
            gen_changepoint(&plan.cfg.source, seed)
        })?;
        if plan.cfg.write_traces {
            res.file(format!("trace-{seed}.csv"), trace.to_csv()?);
        }
        let (switching, oracle, plain) = res.timed(format!("predict seed {seed}"), || {
            let mut state = plan.predictor.state();
            let switching: Vec<f64> = trace
                .symbols
                .iter()
                .map(|&b| {
                    let bits = -state.predict()[b as usize].log2();
                    state.update(b);
                    bits
                })
                .collect();
            let oracle = restart_steps(&trace.symbols, &trace.change_times);
            let plain = restart_steps(&trace.symbols, &[]);
            (switching, oracle, plain)
        });
        let n = trace.symbols.len();
        let (mut cs, mut co, mut ck) = (0.0, 0.0, 0.0);
        for t in 1..=n {
            cs += switching[t - 1];
            co += oracle[t - 1];
            ck += plain[t - 1];
            if t % plan.cfg.stride != 0 && t != n {
                continue;
            }
            let tf = t as f64;
            let changes = trace.change_times.partition_point(|&c| c < t);
            let excess = (cs - co) / tf;
            let budget = switch_prior_budget(changes, t, alpha_hat) + plan.cfg.slack;
            rows.push(vec![
                seed.to_string(),
                t.to_string(),
                changes.to_string(),
                fmt_float(cs / tf),
                fmt_float(co / tf),
                fmt_float(ck / tf),
                fmt_float(excess),
                fmt_float(budget),
                fmt_float(plan.value),
                (excess <= budget).to_string(),
            ]);
        }
    }
    res.file(
        "changepoint.csv",
        csv_with(
            header(
                &[
                    "seed",
                    "t",
                    "changes",
                    "switching_bits",
                    "oracle_bits",
                    "kt_bits",
                    "excess_bits",
                    "budget_bits",
                    "value_bits",
                    "pass",
                ],
                &[],
            ),
            rows,
        )?,
    );
    Ok(res)
}

// ------------------------------------------------------------------ typical

pub struct TypicalPlan {
    mixture: TypicalMixture,
    x: Vec<Symbol>,
    checkpoints: Vec<usize>,
}

pub fn plan_typical(cfg: &TypicalConfig, ctx: &Context) -> CliResult<TypicalPlan> {
    let mixture = TypicalMixture::new(cfg.spec.clone())?;
    let max = cfg.spec.max_horizon() as usize;
    if cfg.n == 0 || cfg.n > max {
        return Err(CliError::config(format!(
            "n = {} must lie in 1..={max}",
            cfg.n
        )));
    }
    let checkpoints = match &cfg.checkpoints {
        Some(c) => c.clone(),
        None => {
            let mut c: Vec<usize> = (0..)
                .map(|e| 1usize << e)
                .take_while(|&p| p < cfg.n)
                .collect();
            c.push(cfg.n);
            c
        }
    };
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::config(
            "checkpoints must be non-empty and strictly increasing",
        ));
    }
    if checkpoints[0] == 0 || *checkpoints.last().expect("non-empty") > cfg.n {
        return Err(CliError::config(format!(
            "checkpoints must lie in 1..={}",
            cfg.n
        )));
    }
    let x = cfg.sequence.generate(cfg.n, ctx.seed)?;
    Ok(TypicalPlan {
        mixture,
        x,
        checkpoints,
    })
}

pub fn run_typical(plan: &TypicalPlan) -> CliResult<RunResult> {
    let mut res = RunResult::default();
    let curve = res.timed("loss curve", || {
        plan.mixture.loss_curve(&plan.x, &plan.checkpoints)
    })?;
    let rows = curve
        .iter()
        .map(|p| {
            vec![
                p.n.to_string(),
                fmt_float(p.per_symbol_bits),
                fmt_float(p.baseline_bits),
            ]
        })
        .collect();
    res.file(
        "typical.csv",
        csv_with(
            header(&["n", "per_symbol_bits", "baseline_bits"], &[]),
            rows,
        )?,
    );
    Ok(res)
}
