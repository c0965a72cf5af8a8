use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax_lowest, fixed_start, optimal_values, AlgoConfig, GreedyCache, IterationRecord, RunTrace, TraceBuilder};
use crate::classes::{ComparatorClass, QClass, RewardClass};
use crate::error::{Error, Result};
use crate::losses::{Dataset, RewardSource, TrajectoryTally};
use crate::mdp::{self, FeedbackKind, Policy, StepTable, TabularMdp};

/// Selected `(f, R)` pair and its objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointChoice {
    pub f_index: usize,
    pub r_index: usize,
    pub objective: f64,
}

/// `λ f_1(s_1) − L_BE(f; R) − L_RM(R)` from sufficient statistics.
pub fn joint_objective(
    f: &StepTable,
    reward: &StepTable,
    comparators: &ComparatorClass,
    tally: &TrajectoryTally,
    lambda: f64,
    initial_state: usize,
) -> f64 {
    lambda * f.state_max(0, initial_state)
        - tally.loss_be(f, RewardSource::Table(reward), comparators)
        - tally.loss_rm(reward)
}

pub(super) fn joint_argmax(
    values: &QClass,
    rewards: &RewardClass,
    comparators: &ComparatorClass,
    tally: &TrajectoryTally,
    lambda: f64,
    initial_state: usize,
) -> JointChoice {
    let reward_losses: alloc::vec::Vec<f64> = rewards.members().iter().map(|r| tally.loss_rm(r)).collect();
    let num_rewards = rewards.len();
    let objectives = values.members().iter().flat_map(|f| {
        let optimism = lambda * f.state_max(0, initial_state);
        rewards.members().iter().zip(&reward_losses).map(move |(r, rm)| {
            optimism - tally.loss_be(f, RewardSource::Table(r), comparators) - rm
        })
    });
    let (flat, objective) = argmax_lowest(objectives).expect("classes are nonempty");
    JointChoice { f_index: flat / num_rewards, r_index: flat % num_rewards, objective }
}

/// Exhaustive optimistic selection over `F × R` on an outcome dataset.
pub fn joint_optimize(
    values: &QClass,
    rewards: &RewardClass,
    comparators: &ComparatorClass,
    data: &Dataset,
    lambda: f64,
    initial_state: usize,
) -> Result<JointChoice> {
    if data.kind() != FeedbackKind::Outcome {
        return Err(Error::KindMismatch { expected: FeedbackKind::Outcome, found: data.kind() });
    }
    let tally = TrajectoryTally::from_dataset(data);
    Ok(joint_argmax(values, rewards, comparators, &tally, lambda, initial_state))
}

/// Joint optimism over value and reward classes with outcome feedback.
///
/// Each iteration selects `(f, R)`, then rolls out `π_f ∘_h π_ref` once for
/// every `h` and records the outcome rewards.
pub fn run_algorithm1(
    mdp: &TabularMdp,
    values: &QClass,
    rewards: &RewardClass,
    comparators: &ComparatorClass,
    cfg: &AlgoConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    let s1 = fixed_start(mdp)?;
    let horizon = mdp.horizon();
    let reference = cfg.reference(mdp.shape());
    let (v_star, j_star) = optimal_values(mdp);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tally = TrajectoryTally::new();
    let mut cache = GreedyCache::new(values.len());
    let mut trace = TraceBuilder::new(mdp.shape(), cfg.iterations);

    for t in 1..=cfg.iterations {
        let choice = joint_argmax(values, rewards, comparators, &tally, cfg.lambda, s1);
        let (policy, first_values) = cache.get(mdp, choice.f_index, &values.members()[choice.f_index]);
        let policy = policy.clone();
        let suboptimality = v_star[s1] - first_values[s1];
        for h in 1..=horizon {
            let rollout = Policy::compose(policy.clone(), reference.clone(), h);
            let tau = mdp::sample_trajectory(mdp, &rollout, &mut rng);
            let r = mdp::sample_outcome_reward(mdp, &tau, cfg.outcome_channel, &mut rng)?;
            trace.visit(&tau);
            tally.add_outcome(&tau, r);
        }
        trace.record(
            &policy,
            IterationRecord { t, f_index: choice.f_index, r_index: Some(choice.r_index), suboptimality, episodes: horizon },
        );
    }
    Ok(trace.finish(mdp, j_star))
}
