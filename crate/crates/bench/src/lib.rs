//! Inputs shared by the benchmarks.

use std::sync::Arc;

use bayesmix_core::fixtures::{seeded, SeededFamily};
use bayesmix_core::{Alphabet, Iid, Kt, Measure};

pub fn bern(p: f64) -> Measure {
    Arc::new(Iid::bernoulli(p).unwrap())
}

pub fn kt() -> Measure {
    Arc::new(Kt::new(Alphabet::BINARY))
}

pub fn uniform() -> Measure {
    Arc::new(Iid::uniform(Alphabet::BINARY))
}

pub fn class(family: SeededFamily, size: usize, seed: u64) -> Vec<Measure> {
    seeded(family, size, seed).unwrap().build().unwrap()
}

/// The periodic sequence `100100…` of length `n`.
pub fn periodic(n: usize) -> Vec<u8> {
    (0..n).map(|t| u8::from(t % 3 == 0)).collect()
}
