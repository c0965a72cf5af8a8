use alloc::string::String;

use crate::mdp::FeedbackKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("transition row at (h={h}, s={s}, a={a}) is not a probability vector")]
    TransitionRow { h: usize, s: usize, a: usize },

    #[error("initial distribution is not a probability vector")]
    InitialDistribution,

    #[error("mean reward at (h={h}, s={s}, a={a}) is {value}, outside [0, 1]")]
    RewardRange { h: usize, s: usize, a: usize, value: f64 },

    #[error("a reachable trajectory has total mean reward {0}, outside [0, 1]")]
    Unnormalized(f64),

    #[error("expected {expected} feedback, found {found}")]
    KindMismatch { expected: FeedbackKind, found: FeedbackKind },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("this learner needs a fixed initial state")]
    RandomInitialState,

    #[error("transition at (h={h}, s={s}, a={a}) is not deterministic")]
    NonDeterministic { h: usize, s: usize, a: usize },

    #[error("confidence set is empty at iteration {iteration}; beta_conf = {beta_conf} is too small")]
    EmptyConfidenceSet { iteration: usize, beta_conf: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
