//! Piecewise-i.i.d. (change-point) sources and a switching-prior predictor.
//!
//! The predictor places a Bernoulli(α̂) switch process over change times:
//! before every step `t ≥ 1` a new segment starts with probability α̂.
//! Between changes each segment is predicted by its own KT estimator. The
//! sequence probability is therefore
//! `Σ_segmentations prior(segmentation) · Π_segments KT(segment)`, which is at
//! least the prior of the true segmentation times the restart oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{log_prob, Alphabet, Kt, ModelSpec, ProcessMeasure, Stepper, Symbol};

/// KT-within-segments predictor with a Bernoulli(α̂) switch prior.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingKt {
    alphabet: Alphabet,
    alpha_hat: f64,
}

impl SwitchingKt {
    pub fn new(alphabet: Alphabet, alpha_hat: f64) -> Result<Self> {
        if !(alpha_hat > 0.0 && alpha_hat < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "switch rate {alpha_hat} must lie in (0, 1)"
            )));
        }
        Ok(SwitchingKt {
            alphabet,
            alpha_hat,
        })
    }

    pub fn alpha_hat(&self) -> f64 {
        self.alpha_hat
    }

    pub fn state(&self) -> SwitchingState {
        SwitchingState {
            alphabet: self.alphabet,
            alpha_hat: self.alpha_hat,
            t: 0,
            candidates: vec![Candidate {
                start: 0,
                counts: vec![0; self.alphabet.size()],
                total: 0,
                weight: 1.0,
            }],
        }
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    start: usize,
    counts: Vec<u64>,
    total: u64,
    weight: f64,
}

/// Posterior over the start of the current segment, owned by one pass.
///
/// Weights are renormalized after every symbol; the switch transition for
/// the next step is already applied, so [`SwitchingState::predict`] reads the
/// predictive mixture directly.
#[derive(Clone, Debug)]
pub struct SwitchingState {
    alphabet: Alphabet,
    alpha_hat: f64,
    t: usize,
    candidates: Vec<Candidate>,
}

impl SwitchingState {
    /// `Σ_s P(last change at s | prefix) · KT_s(next | prefix_{s..})`.
    pub fn predict(&self) -> Vec<f64> {
        let half = self.alphabet.size() as f64 / 2.0;
        let mut out = vec![0.0; self.alphabet.size()];
        for c in &self.candidates {
            let scale = c.weight / (c.total as f64 + half);
            for (o, &k) in out.iter_mut().zip(&c.counts) {
                *o += scale * (k as f64 + 0.5);
            }
        }
        out
    }

    /// Bayes update on `symbol`, then the switch transition.
    pub fn update(&mut self, symbol: Symbol) {
        let half = self.alphabet.size() as f64 / 2.0;
        let mut z = 0.0;
        for c in &mut self.candidates {
            c.weight *= (c.counts[symbol as usize] as f64 + 0.5) / (c.total as f64 + half);
            z += c.weight;
            c.counts[symbol as usize] += 1;
            c.total += 1;
        }
        let stay = 1.0 - self.alpha_hat;
        for c in &mut self.candidates {
            c.weight = c.weight / z * stay;
        }
        self.t += 1;
        self.candidates.retain(|c| c.weight > 0.0);
        self.candidates.push(Candidate {
            start: self.t,
            counts: vec![0; self.alphabet.size()],
            total: 0,
            weight: self.alpha_hat,
        });
    }

    /// `(segment start, probability)` pairs; sums to one.
    pub fn posterior(&self) -> Vec<(usize, f64)> {
        self.candidates
            .iter()
            .map(|c| (c.start, c.weight))
            .collect()
    }

    pub fn time(&self) -> usize {
        self.t
    }
}

impl Stepper for SwitchingState {
    fn cond(&self) -> Vec<f64> {
        self.predict()
    }
    fn advance(&mut self, symbol: Symbol) {
        self.update(symbol);
    }
    fn box_clone(&self) -> Box<dyn Stepper + '_> {
        Box::new(self.clone())
    }
}

impl ProcessMeasure for SwitchingKt {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn tag(&self) -> String {
        format!("switching-kt({})", self.alpha_hat)
    }

    fn stepper(&self) -> Box<dyn Stepper + '_> {
        Box::new(self.state())
    }

    fn spec(&self) -> Option<ModelSpec> {
        Some(ModelSpec::SwitchingKt {
            alpha_hat: self.alpha_hat,
        })
    }
}

/// Conditional of the switching predictor after `prefix`.
pub fn switching_kt_cond(predictor: &SwitchingKt, prefix: &[Symbol]) -> Vec<f64> {
    let mut state = predictor.state();
    for &s in prefix {
        state.update(s);
    }
    state.predict()
}

/// When segments start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChangeSchedule {
    /// A change before each step `t ≥ 1` with probability α.
    Bernoulli {},
    /// A change at every positive multiple of `period`.
    Grid { period: usize },
}

/// Where segment parameters come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SegmentSource {
    /// Parameters taken from the list in order, cycling.
    List { theta: Vec<f64> },
    /// Parameters drawn uniformly from `[0, 1]`.
    Uniform {},
}

/// A binary change-point source with change frequency at most α.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangePointSpec {
    pub alpha: f64,
    pub n: usize,
    pub schedule: ChangeSchedule,
    pub source: SegmentSource,
}

impl ChangePointSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "change frequency {} must lie in [0, 1)",
                self.alpha
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if let ChangeSchedule::Grid { period: 0 } = self.schedule {
            return Err(Error::InvalidParameter(
                "grid period must be positive".into(),
            ));
        }
        if let SegmentSource::List { theta } = &self.source {
            if theta.is_empty() || theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Error::InvalidParameter(
                    "segment list must be non-empty with entries in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// `⌊α n⌋`, the most changes the generator keeps.
    pub fn max_changes(&self) -> usize {
        (self.alpha * self.n as f64).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
    pub theta: f64,
}

/// Full generator output.
#[derive(Clone, Debug, PartialEq)]
pub struct ChangePointTrace {
    pub symbols: Vec<Symbol>,
    pub change_times: Vec<usize>,
    pub segments: Vec<Segment>,
    /// Proposed changes dropped to keep the count at most `⌊α n⌋`.
    pub rejected: usize,
}

impl ChangePointTrace {
    pub fn theta_at(&self, t: usize) -> f64 {
        let idx = self.segments.partition_point(|s| s.start <= t) - 1;
        self.segments[idx].theta
    }

    /// CSV body with columns `t, symbol, is_change, theta`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "symbol", "is_change", "theta"])?;
        let mut changes = self.change_times.iter().peekable();
        for (t, &s) in self.symbols.iter().enumerate() {
            let is_change = changes.peek() == Some(&&t);
            if is_change {
                changes.next();
            }
            w.write_record([
                t.to_string(),
                s.to_string(),
                (is_change as u8).to_string(),
                crate::report::fmt_float(self.theta_at(t)),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("ascii"))
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draws a change-point sequence. Deterministic in `(spec, seed)`.
pub fn gen_changepoint(spec: &ChangePointSpec, seed: u64) -> Result<ChangePointTrace> {
    spec.validate()?;
    let mut schedule_rng = stream(seed, 0);
    let mut param_rng = stream(seed, 1);
    let mut symbol_rng = stream(seed, 2);
    let max_changes = spec.max_changes();

    let mut draw_theta = |i: usize| match &spec.source {
        SegmentSource::List { theta } => theta[i % theta.len()],
        SegmentSource::Uniform {} => param_rng.gen::<f64>(),
    };

    let mut change_times = Vec::new();
    let mut rejected = 0;
    let mut segments = vec![Segment {
        start: 0,
        len: 0,
        theta: draw_theta(0),
    }];
    let mut symbols = Vec::with_capacity(spec.n);
    for t in 0..spec.n {
        if t > 0 {
            let proposed = match spec.schedule {
                ChangeSchedule::Bernoulli {} => schedule_rng.gen::<f64>() < spec.alpha,
                ChangeSchedule::Grid { period } => t % period == 0,
            };
            if proposed {
                if change_times.len() < max_changes {
                    change_times.push(t);
                    let theta = draw_theta(segments.len());
                    segments.push(Segment {
                        start: t,
                        len: 0,
                        theta,
                    });
                } else {
                    rejected += 1;
                }
            }
        }
        let seg = segments.last_mut().expect("at least one segment");
        seg.len += 1;
        let u: f64 = symbol_rng.gen();
        symbols.push((u < seg.theta) as Symbol);
    }
    Ok(ChangePointTrace {
        symbols,
        change_times,
        segments,
        rejected,
    })
}

/// Code length in bits of KT restarted at the given change times.
pub fn restart_oracle_bits(x: &[Symbol], change_times: &[usize]) -> Result<f64> {
    let kt = Kt::new(Alphabet::BINARY);
    let mut bounds = vec![0];
    bounds.extend_from_slice(change_times);
    bounds.push(x.len());
    let mut bits = 0.0;
    for w in bounds.windows(2) {
        bits += log_prob(&kt, &x[w[0]..w[1]])?.bits();
    }
    Ok(bits)
}

/// Per-symbol coding cost of the switch prior on a path with `changes`
/// changes: `(changes·log₂(1/α̂) + n·log₂(1/(1−α̂))) / n`.
pub fn switch_prior_budget(changes: usize, n: usize, alpha_hat: f64) -> f64 {
    (changes as f64 * (1.0 / alpha_hat).log2() + n as f64 * (1.0 / (1.0 - alpha_hat)).log2())
        / n as f64
}

/// `α (1 − ½ log₂ α)` bits per symbol.
pub fn changepoint_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "change frequency {alpha} must lie in (0, 1)"
        )));
    }
    Ok(alpha * (1.0 - 0.5 * alpha.log2()))
}
