//! Experiment configuration files.
//!
//! One TOML document holds optional top-level `seed` and `tolerance` and one
//! table per subcommand (`[eval-loss]`, `[extract]`, `[capacity]`,
//! `[changepoint]`, `[typical]`). A subcommand reads only its own table.
//! Unknown keys anywhere are errors. Relative paths are resolved against
//! the directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bayesmix_core::cover::{LevelParams, SlackParams};
use bayesmix_core::families::{ChangePointSpec, TypicalMixtureSpec};
use bayesmix_core::fixtures::SeededClass;
use bayesmix_core::measures::{parse_seq, DEFAULT_CAP};
use bayesmix_core::{Alphabet, Iid, Measure, ModelClass, ModelSpec, Symbol};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_loss: Option<EvalLossConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract: Option<ExtractConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changepoint: Option<ChangepointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typical: Option<TypicalConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        toml::from_str(s).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display()))
    }
}

fn default_alphabet() -> usize {
    2
}

fn default_cap() -> u64 {
    DEFAULT_CAP
}

fn default_samples() -> u64 {
    1000
}

/// A finite class: exactly one of the source keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ClassSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// A class document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeded: Option<SeededClass>,
    /// `Bern(i/(points+1))` for `i = 1..=points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bernoulli_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<ModelClass>,
}

/// A resolved class with member ids.
#[derive(Clone)]
pub struct LoadedClass {
    pub id: String,
    pub document: ModelClass,
    pub members: Vec<Measure>,
    pub ids: Vec<String>,
}

impl ClassSpec {
    pub fn load(&self, base: &Path, fallback_id: &str) -> CliResult<LoadedClass> {
        let set = [
            self.path.is_some(),
            self.seeded.is_some(),
            self.bernoulli_grid.is_some(),
            self.inline.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if set != 1 {
            return Err(CliError::config(format!(
                "class {fallback_id}: give exactly one of path, seeded, bernoulli-grid, inline"
            )));
        }
        let document = if let Some(p) = &self.path {
            let full = base.join(p);
            ModelClass::load(&full).map_err(|e| CliError::from(e).context(full.display()))?
        } else if let Some(s) = &self.seeded {
            s.generate()?
        } else if let Some(points) = self.bernoulli_grid {
            bernoulli_grid(points)?
        } else {
            self.inline.clone().expect("checked above")
        };
        let members = document.build()?;
        let ids = document.ids()?;
        let id = self
            .id
            .clone()
            .or_else(|| document.name.clone())
            .unwrap_or_else(|| fallback_id.to_string());
        Ok(LoadedClass {
            id,
            document,
            members,
            ids,
        })
    }
}

fn bernoulli_grid(points: usize) -> CliResult<ModelClass> {
    if points == 0 {
        return Err(CliError::config("bernoulli-grid needs at least one point"));
    }
    let mut doc = ModelClass::new(Some(format!("bernoulli-grid-{points}")), Alphabet::BINARY);
    for i in 1..=points {
        let p = i as f64 / (points + 1) as f64;
        let m: Measure = Arc::new(Iid::bernoulli(p)?);
        doc.push(Some(format!("bern-{i}")), None, &m)?;
    }
    Ok(doc)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Exact,
    Dp,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalLossConfig {
    #[serde(default = "default_alphabet")]
    pub alphabet: usize,
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    pub pair: Vec<PairConfig>,
}

/// μ as one model or every member of a class, against one predictor ρ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PairConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_class: Option<ClassSpec>,
    pub rho: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExtractConfig {
    pub class: ClassSpec,
    /// Reference predictors `ρ_j`; more than one yields the combination φ.
    pub reference: Vec<ModelSpec>,
    /// `(n, k)` grid points of the construction.
    pub grid: Vec<(usize, usize)>,
    #[serde(default)]
    pub audit: Vec<AuditConfig>,
    #[serde(default = "default_cap")]
    pub cap: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub n: usize,
    pub k: usize,
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CapacityConfig {
    pub class: Vec<ClassSpec>,
    pub horizons: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_capacity_cap")]
    pub cap: u64,
}

fn default_max_iter() -> usize {
    1_000_000
}

fn default_capacity_cap() -> u64 {
    1 << 24
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ChangepointConfig {
    pub source: ChangePointSpec,
    /// Switch rate of the predictor; defaults to the source's α, or `1/n`
    /// when α is zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_hat: Option<f64>,
    /// Generator seeds; defaults to the global seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Loss rows are written every `stride` symbols and at the end.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Allowance added to the switch-prior budget, bits per symbol.
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default)]
    pub write_traces: bool,
}

fn default_stride() -> usize {
    1024
}

fn default_slack() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequenceSource {
    /// The pattern repeated, e.g. `"100"`.
    Periodic {
        pattern: String,
    },
    Literal {
        symbols: String,
    },
    /// `Bern(p)` draws from the global seed.
    Bernoulli {
        p: f64,
    },
}

impl SequenceSource {
    pub fn generate(&self, n: usize, seed: u64) -> CliResult<Vec<Symbol>> {
        let check = |x: Vec<Symbol>| -> CliResult<Vec<Symbol>> {
            Alphabet::BINARY.check(&x)?;
            Ok(x)
        };
        match self {
            SequenceSource::Periodic { pattern } => {
                let p = check(parse_seq(pattern)?)?;
                if p.is_empty() {
                    return Err(CliError::config("periodic pattern must not be empty"));
                }
                Ok(p.iter().copied().cycle().take(n).collect())
            }
            SequenceSource::Literal { symbols } => {
                let x = check(parse_seq(symbols)?)?;
                if x.len() < n {
                    return Err(CliError::config(format!(
                        "literal sequence has {} symbols, fewer than n = {n}",
                        x.len()
                    )));
                }
                Ok(x[..n].to_vec())
            }
            SequenceSource::Bernoulli { p } => {
                let m = Iid::bernoulli(*p)?;
                let mut rng = bayesmix_core::loss::sample_rng(seed, 0);
                Ok(bayesmix_core::measures::sample(&m, n, &mut rng))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TypicalConfig {
    #[serde(default)]
    pub spec: TypicalMixtureSpec,
    pub sequence: SequenceSource,
    pub n: usize,
    /// Defaults to powers of two below `n`, then `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
}

pub fn check_horizons(horizons: &[usize]) -> CliResult<()> {
    if horizons.is_empty() {
        return Err(CliError::config("horizons must not be empty"));
    }
    if horizons.contains(&0) {
        return Err(CliError::config("horizons must be positive"));
    }
    Ok(())
}

pub fn check_audit(
    a: &AuditConfig,
    grid: &[(usize, usize)],
    alphabet: Alphabet,
) -> CliResult<SlackParams> {
    if !grid.contains(&(a.n, a.k)) {
        return Err(CliError::config(format!(
            "audit point ({}, {}) is not in the grid",
            a.n, a.k
        )));
    }
    let params = LevelParams::new(a.n, a.k, alphabet)?;
    Ok(SlackParams::new(a.a, &params)?)
}

pub fn check_tolerance(tol: f64) -> CliResult<f64> {
    if tol.is_finite() && tol > 0.0 {
        Ok(tol)
    } else {
        Err(CliError::config(format!(
            "tolerance {tol} must be positive"
        )))
    }
}
