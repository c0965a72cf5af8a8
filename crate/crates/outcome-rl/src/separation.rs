//! Outcome versus process feedback on the ReLU family.
//!
//! For each seed a fresh packing `Θ` and hidden vector are drawn. A
//! process-feedback learner over the hypothesis class and a round-robin
//! outcome learner over the arm policies each get the same episode budget;
//! success means the policy recommended when the budget runs out is
//! 0.1-optimal.

use outcome_rl_core::algorithms::{run_process_reward_baseline, run_round_robin_outcome, AlgoConfig};
use outcome_rl_core::classes::ComparatorClass;
use outcome_rl_core::env::{build_relu_family, sphere_packing, ReluFamily, DEFAULT_PACKING_FAILURES};
use outcome_rl_core::mdp::policy_value;
use outcome_rl_core::{OutcomeChannel, Policy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::harness::parallel_map;

/// Policies within this gap of the optimum count as found.
pub const SUCCESS_GAP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationParams {
    pub dimension: usize,
    pub epsilon: f64,
    /// Episodes per learner; `None` means twice the number of arms.
    pub budget: Option<usize>,
    pub seeds: Vec<u64>,
    /// Upper limit on the packing size `N`.
    pub max_arms: usize,
    /// Optimism weight of the process learner.
    pub lambda: f64,
}

impl SeparationParams {
    pub fn new(dimension: usize, epsilon: f64, seeds: Vec<u64>) -> Self {
        Self { dimension, epsilon, budget: None, seeds, max_arms: 32, lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: String,
    pub successes: usize,
    pub runs: usize,
    pub success_fraction: f64,
    /// Episodes spent before the first 0.1-optimal recommendation, if any
    /// occurred within the budget.
    pub episodes_to_optimal: Vec<Option<usize>>,
    pub budget_exhausted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub dimension: usize,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    pub num_arms: Vec<usize>,
    pub budgets: Vec<usize>,
    pub process: ModeSummary,
    pub outcome: ModeSummary,
}

#[derive(Debug, Clone, Copy)]
struct SeedOutcome {
    arms: usize,
    budget: usize,
    process: (bool, Option<usize>),
    outcome: (bool, Option<usize>),
}

fn summarize(mode: &str, runs: &[(bool, Option<usize>)]) -> ModeSummary {
    let successes = runs.iter().filter(|r| r.0).count();
    ModeSummary {
        mode: mode.to_string(),
        successes,
        runs: runs.len(),
        success_fraction: successes as f64 / runs.len().max(1) as f64,
        episodes_to_optimal: runs.iter().map(|r| r.1).collect(),
        budget_exhausted: runs.len() - successes,
    }
}

/// Draws `Θ` and the hidden index for one seed.
pub fn relu_instance(dimension: usize, epsilon: f64, max_arms: usize, seed: u64) -> Result<ReluFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = sphere_packing(dimension, epsilon, max_arms, DEFAULT_PACKING_FAILURES, &mut rng)?;
    let hidden = rng.random_range(0..theta.len());
    Ok(build_relu_family(theta, epsilon, hidden)?)
}

fn run_seed(params: &SeparationParams, seed: u64) -> Result<SeedOutcome> {
    let family = relu_instance(params.dimension, params.epsilon, params.max_arms, seed)?;
    let mdp = family.mdp();
    let arms = family.num_arms();
    let budget = params.budget.unwrap_or(2 * arms);
    let optimum = family.value_of_first_action(family.hidden_index());
    let good = |policy: &Policy| policy_value(mdp, policy).value >= optimum - SUCCESS_GAP;

    let horizon = mdp.horizon();
    let values = family.hypothesis_q_class();
    let comparators = ComparatorClass::from_value_class(&values);
    let iterations = budget / horizon + 1;
    let mut cfg = AlgoConfig::new(params.lambda, iterations).with_seed(seed);
    cfg.outcome_channel = OutcomeChannel::Bernoulli;
    let trace = run_process_reward_baseline(mdp, &values, &comparators, &cfg)?;
    let greedy: Vec<bool> = trace
        .records
        .iter()
        .map(|r| r.suboptimality <= SUCCESS_GAP)
        .collect();
    let process = (
        greedy[iterations - 1],
        greedy.iter().position(|&ok| ok).map(|t| t * horizon),
    );

    let policies: Vec<Policy> = (0..arms).map(|a| family.arm_policy(a)).collect();
    let rr = run_round_robin_outcome(mdp, &policies, budget, OutcomeChannel::Bernoulli, seed)?;
    let arm_good: Vec<bool> = policies.iter().map(&good).collect();
    let outcome = (
        budget > 0 && arm_good[rr.final_recommendation()],
        rr.recommendations.iter().position(|&a| arm_good[a]).map(|e| e + 1),
    );
    Ok(SeedOutcome { arms, budget, process, outcome })
}

pub fn separation_experiment(params: &SeparationParams) -> Result<SeparationReport> {
    if params.seeds.is_empty() {
        return Err(HarnessError::validation("seeds", "at least one seed is required"));
    }
    if params.dimension == 0 {
        return Err(HarnessError::validation("d", "must be positive"));
    }
    if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
        return Err(HarnessError::validation("eps", "must lie in (0, 1)"));
    }
    if params.max_arms == 0 {
        return Err(HarnessError::validation("max_arms", "must be positive"));
    }
    if !(params.lambda >= 0.0 && params.lambda.is_finite()) {
        return Err(HarnessError::validation("lambda", "must be finite and nonnegative"));
    }
    let runs = parallel_map(&params.seeds, |_, &seed| run_seed(params, seed))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let process: Vec<_> = runs.iter().map(|r| r.process).collect();
    let outcome: Vec<_> = runs.iter().map(|r| r.outcome).collect();
    Ok(SeparationReport {
        dimension: params.dimension,
        epsilon: params.epsilon,
        seeds: params.seeds.clone(),
        num_arms: runs.iter().map(|r| r.arms).collect(),
        budgets: runs.iter().map(|r| r.budget).collect(),
        process: summarize("process", &process),
        outcome: summarize("outcome", &outcome),
    })
}
