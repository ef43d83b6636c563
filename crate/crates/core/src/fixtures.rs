//! Seeded model classes for experiments and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Alphabet, Member, ModelClass, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeededFamily {
    Bernoulli,
    Markov,
    /// Bernoulli, Markov and eventually periodic Dirac members in turn.
    Mixed,
}

/// A class drawn from a seeded generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeededClass {
    pub family: SeededFamily,
    pub size: usize,
    pub seed: u64,
}

impl SeededClass {
    pub fn generate(&self) -> Result<ModelClass> {
        if self.size == 0 {
            return Err(Error::EmptyClass);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut class = ModelClass::new(
            Some(format!("{:?}-{}-{}", self.family, self.size, self.seed).to_lowercase()),
            Alphabet::BINARY,
        );
        for j in 0..self.size {
            let model = match (self.family, j % 3) {
                (SeededFamily::Bernoulli, _) | (SeededFamily::Mixed, 0) => bernoulli(&mut rng),
                (SeededFamily::Markov, _) | (SeededFamily::Mixed, 1) => markov(&mut rng),
                (SeededFamily::Mixed, _) => dirac(&mut rng),
            };
            class.member.push(Member {
                id: Some(format!("m{j}")),
                weight: None,
                model,
            });
        }
        Ok(class)
    }
}

/// A parameter in `[0.02, 0.98]` on a 1e-3 grid.
fn param(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(20..=980) as f64 / 1000.0
}

fn bernoulli(rng: &mut ChaCha8Rng) -> ModelSpec {
    ModelSpec::Bernoulli { p: param(rng) }
}

fn markov(rng: &mut ChaCha8Rng) -> ModelSpec {
    let p0 = param(rng);
    let a = param(rng);
    let b = param(rng);
    ModelSpec::Markov {
        initial: vec![1.0 - p0, p0],
        transition: vec![vec![1.0 - a, a], vec![1.0 - b, b]],
    }
}

fn dirac(rng: &mut ChaCha8Rng) -> ModelSpec {
    let prefix_len = rng.gen_range(0..=2);
    let cycle_len = rng.gen_range(1..=3);
    ModelSpec::Dirac {
        prefix: (0..prefix_len).map(|_| rng.gen_range(0..=1)).collect(),
        cycle: (0..cycle_len).map(|_| rng.gen_range(0..=1)).collect(),
    }
}

pub fn seeded(family: SeededFamily, size: usize, seed: u64) -> Result<ModelClass> {
    SeededClass { family, size, seed }.generate()
}

/// The all-zeros and all-ones Dirac measures.
pub fn two_dirac() -> ModelClass {
    let mut class = ModelClass::new(Some("two-dirac".into()), Alphabet::BINARY);
    for (id, s) in [("zeros", 0), ("ones", 1)] {
        class.member.push(Member {
            id: Some(id.into()),
            weight: None,
            model: ModelSpec::Dirac {
                prefix: vec![],
                cycle: vec![s],
            },
        });
    }
    class
}
