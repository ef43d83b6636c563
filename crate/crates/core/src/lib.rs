//! Sequential probability forecasting over finite alphabets under
//! cumulative KL loss.
//!
//! * [`measures`]: process measures, mixtures, the prior weight schedule and
//!   model-class documents.
//! * [`loss`]: expected cumulative KL divergence by enumeration, by
//!   count-vector dynamic programming and by Monte Carlo.
//! * [`cover`]: likelihood sets, level partitions, greedy covering, mixture
//!   assembly and the dominance audit.
//! * [`minimax`]: finite-horizon minimax values and admissibility checks.
//! * [`families`]: typical-sequence mixtures and change-point sources.

pub mod cover;
pub mod error;
pub mod families;
pub mod fixtures;
pub mod logprob;
pub mod loss;
pub mod measures;
pub mod minimax;
pub mod report;

pub use error::{Error, Result};
pub use logprob::LogProb;
pub use measures::{
    log_prob, mix_with_uniform, posterior_weights, Alphabet, Dirac, FiniteMixture, Iid, Kt,
    MarkovChain, Measure, ModelClass, ModelSpec, ProcessMeasure, Symbol,
};
