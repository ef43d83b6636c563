//! Model-class documents.
//!
//! A class is a TOML document listing one `[[member]]` per measure:
//!
//! ```toml
//! name = "two-dirac"
//! alphabet = 2
//!
//! [[member]]
//! id = "zeros"          # optional, defaults to the measure tag
//! weight = 0.5          # optional relative prior weight, defaults to 1
//! model = { family = "dirac", prefix = [], cycle = [0] }
//!
//! [[member]]
//! model = { family = "bernoulli", p = 0.75 }
//! ```
//!
//! Families: `dirac {prefix, cycle}`, `bernoulli {p}`, `iid {theta}`,
//! `uniform`, `markov {initial, transition}`, `kt`,
//! `switching-kt {alpha_hat}`, `smoothed {inner}` (half-half with uniform)
//! and `mixture {member}` (nested members with weights). Unknown keys are
//! rejected.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    mix_with_uniform, Alphabet, Dirac, FiniteMixture, Iid, Kt, MarkovChain, Measure, Symbol,
};
use crate::error::{Error, Result};
use crate::families::SwitchingKt;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Dirac {
        #[serde(default)]
        prefix: Vec<Symbol>,
        cycle: Vec<Symbol>,
    },
    Bernoulli {
        p: f64,
    },
    Iid {
        theta: Vec<f64>,
    },
    Uniform {},
    Markov {
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
    },
    Kt {},
    SwitchingKt {
        alpha_hat: f64,
    },
    Smoothed {
        inner: Box<ModelSpec>,
    },
    Mixture {
        member: Vec<Member>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Member {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    pub model: ModelSpec,
}

impl ModelSpec {
    pub fn build(&self, alphabet: Alphabet) -> Result<Measure> {
        let check = |got: Alphabet| {
            if got == alphabet {
                Ok(())
            } else {
                Err(Error::AlphabetMismatch {
                    expected: alphabet.size(),
                    found: got.size(),
                })
            }
        };
        let m: Measure = match self {
            ModelSpec::Dirac { prefix, cycle } => {
                Arc::new(Dirac::new(alphabet, prefix.clone(), cycle.clone())?)
            }
            ModelSpec::Bernoulli { p } => {
                check(Alphabet::BINARY)?;
                Arc::new(Iid::bernoulli(*p)?)
            }
            ModelSpec::Iid { theta } => {
                let m = Iid::new(theta.clone())?;
                check(super::ProcessMeasure::alphabet(&m))?;
                Arc::new(m)
            }
            ModelSpec::Uniform {} => Arc::new(Iid::uniform(alphabet)),
            ModelSpec::Markov {
                initial,
                transition,
            } => {
                let m = MarkovChain::new(initial.clone(), transition.clone())?;
                check(super::ProcessMeasure::alphabet(&m))?;
                Arc::new(m)
            }
            ModelSpec::Kt {} => Arc::new(Kt::new(alphabet)),
            ModelSpec::SwitchingKt { alpha_hat } => {
                Arc::new(SwitchingKt::new(alphabet, *alpha_hat)?)
            }
            ModelSpec::Smoothed { inner } => Arc::new(mix_with_uniform(inner.build(alphabet)?)),
            ModelSpec::Mixture { member } => Arc::new(build_mixture(member, alphabet)?),
        };
        Ok(m)
    }
}

fn build_mixture(members: &[Member], alphabet: Alphabet) -> Result<FiniteMixture> {
    if members.is_empty() {
        return Err(Error::EmptyClass);
    }
    let parts = members
        .iter()
        .map(|m| Ok((m.weight.unwrap_or(1.0), m.model.build(alphabet)?)))
        .collect::<Result<Vec<_>>>()?;
    FiniteMixture::new(parts)
}

/// A finite model class, optionally with prior weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelClass {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub alphabet: Alphabet,
    #[serde(default)]
    pub member: Vec<Member>,
}

impl ModelClass {
    pub fn new(name: Option<String>, alphabet: Alphabet) -> Self {
        ModelClass {
            name,
            alphabet,
            member: Vec::new(),
        }
    }

    /// Appends a measure; fails if it has no document form.
    pub fn push(&mut self, id: Option<String>, weight: Option<f64>, m: &Measure) -> Result<()> {
        if m.alphabet() != self.alphabet {
            return Err(Error::AlphabetMismatch {
                expected: self.alphabet.size(),
                found: m.alphabet().size(),
            });
        }
        let model = m
            .spec()
            .ok_or_else(|| Error::Document(format!("{} has no document form", m.tag())))?;
        self.member.push(Member { id, weight, model });
        Ok(())
    }

    pub fn from_measures(name: Option<String>, members: &[Measure]) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyClass)?;
        let mut class = ModelClass::new(name, first.alphabet());
        for m in members {
            class.push(None, None, m)?;
        }
        Ok(class)
    }

    pub fn len(&self) -> usize {
        self.member.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member.is_empty()
    }

    /// Builds every member.
    pub fn build(&self) -> Result<Vec<Measure>> {
        if self.member.is_empty() {
            return Err(Error::EmptyClass);
        }
        self.member
            .iter()
            .map(|m| m.model.build(self.alphabet))
            .collect()
    }

    /// Identifiers, falling back to the measure tags.
    pub fn ids(&self) -> Result<Vec<String>> {
        self.member
            .iter()
            .map(|m| match &m.id {
                Some(id) => Ok(id.clone()),
                None => Ok(m.model.build(self.alphabet)?.tag()),
            })
            .collect()
    }

    /// The members combined with their weights (1 when absent), normalized.
    pub fn to_mixture(&self) -> Result<FiniteMixture> {
        build_mixture(&self.member, self.alphabet)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let class: ModelClass = toml::from_str(s).map_err(|e| Error::Document(e.to_string()))?;
        class.build()?;
        Ok(class)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Document(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Document(format!("{}: {e}", path.display())))?;
        ModelClass::from_toml_str(&text)
            .map_err(|e| Error::Document(format!("{}: {e}", path.display())))
    }
}
