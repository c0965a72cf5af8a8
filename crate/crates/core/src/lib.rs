//! Exact tabular machinery for online reinforcement learning with
//! outcome-level (whole-trajectory) reward and pairwise preference feedback.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, threads or the command line lives in the `outcome-rl` crate.
//!
//! Layout:
//!
//! * [`mdp`]: finite-horizon MDPs, policies, dynamic-programming oracles,
//!   sampling and feedback channels.
//! * [`decomposition`]: exact evaluation of the performance-difference and
//!   trajectory-decomposition identities used to analyse the learners.
//! * [`classes`]: finite value, reward and comparator classes.
//! * [`losses`]: the empirical losses the learners optimise.
//! * [`algorithms`]: the optimistic learners and the two baselines.
//! * [`coverability`]: the coverability coefficient and its bisection oracle.
//! * [`env`]: named hard instances and random generators.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod algorithms;
pub mod classes;
pub mod coverability;
pub mod decomposition;
pub mod env;
mod error;
pub mod losses;
pub mod math;
pub mod mdp;

pub use error::{Error, Result};
pub use mdp::{
    FeedbackKind, FeedbackSample, MarkovPolicy, OutcomeChannel, Policy, Shape, StepTable,
    TabularMdp, Trajectory, ValueTable,
};
