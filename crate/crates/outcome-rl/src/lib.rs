//! Experiment harness, file formats and CLI support for `outcome-rl-core`.

pub mod config;
mod error;
pub mod harness;
pub mod io;
pub mod separation;

pub use config::{ExperimentConfig, Prepared};
pub use error::{HarnessError, Result};
pub use harness::{run_experiment, SummaryReport};
pub use separation::{separation_experiment, SeparationParams, SeparationReport};

pub use outcome_rl_core as core;
