//! Example families: the countable Dirac mixture over typical sequences and
//! piecewise-i.i.d. change-point sources.

mod changepoint;
mod typical;

pub use changepoint::{
    changepoint_value, gen_changepoint, restart_oracle_bits, switch_prior_budget,
    switching_kt_cond, ChangePointSpec, ChangePointTrace, ChangeSchedule, Segment, SegmentSource,
    SwitchingKt, SwitchingState,
};
pub use typical::{
    count_extensions, typical_mixture_log_prob, Frac, TypicalMixture, TypicalMixtureSpec,
    TypicalPoint,
};
