use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    argmax_lowest, argmin_highest, fixed_start, optimal_values, AlgoConfig, GreedyCache, IterationRecord, RunTrace,
    TraceBuilder,
};
use crate::classes::{ComparatorClass, QClass, RewardClass};
use crate::error::{Error, Result};
use crate::losses::{RewardSource, TrajectoryTally};
use crate::mdp::{self, OutcomeChannel, Policy, TabularMdp};

/// Decoupled baseline: fit a reward model to outcomes, then run confidence-set
/// optimism on per-step labels produced by that fit.
///
/// The reward fit breaks ties toward the highest index. Each new trajectory is
/// relabelled with the current fit; older labels are kept as they were.
pub fn run_fitted_reward_baseline(
    mdp: &TabularMdp,
    values: &QClass,
    rewards: &RewardClass,
    comparators: &ComparatorClass,
    cfg: &AlgoConfig,
) -> Result<RunTrace> {
    cfg.validate()?;
    let s1 = fixed_start(mdp)?;
    let (v_star, j_star) = optimal_values(mdp);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut outcomes = TrajectoryTally::new();
    let mut relabelled = TrajectoryTally::new();
    let mut cache = GreedyCache::new(values.len());
    let mut trace = TraceBuilder::new(mdp.shape(), cfg.iterations);

    for t in 1..=cfg.iterations {
        let optimism = values.members().iter().map(|f| {
            let loss = relabelled.loss_be(f, RewardSource::Observed, comparators);
            if loss <= cfg.beta_conf {
                f.state_max(0, s1)
            } else {
                f64::NEG_INFINITY
            }
        });
        let f_index = match argmax_lowest(optimism) {
            Some((i, v)) if v > f64::NEG_INFINITY => i,
            _ => return Err(Error::EmptyConfidenceSet { iteration: t, beta_conf: cfg.beta_conf }),
        };
        let (policy, first_values) = cache.get(mdp, f_index, &values.members()[f_index]);
        let policy = policy.clone();
        let suboptimality = v_star[s1] - first_values[s1];
        let tau = mdp::sample_trajectory(mdp, &policy, &mut rng);
        let r = mdp::sample_outcome_reward(mdp, &tau, cfg.outcome_channel, &mut rng)?;
        trace.visit(&tau);
        outcomes.add_outcome(&tau, r);
        let (r_index, _) =
            argmin_highest(rewards.members().iter().map(|rm| outcomes.loss_rm(rm))).expect("class is nonempty");
        let fitted = &rewards.members()[r_index];
        let labels: Vec<f64> = tau.steps().iter().enumerate().map(|(h, &(s, a))| fitted.get(h, s, a)).collect();
        relabelled.add_process(&tau, &labels);
        trace.record(&policy, IterationRecord { t, f_index, r_index: Some(r_index), suboptimality, episodes: 1 });
    }
    Ok(trace.finish(mdp, j_star))
}

/// Optimism with observed per-step rewards in place of a reward class.
///
/// Mirrors the joint learner's roll-out schedule (`H` episodes per iteration).
pub fn run_process_reward_baseline(
    mdp: &TabularMdp,
    values: &QClass,
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
        let objectives = values
            .members()
            .iter()
            .map(|f| cfg.lambda * f.state_max(0, s1) - tally.loss_be(f, RewardSource::Observed, comparators));
        let (f_index, _) = argmax_lowest(objectives).expect("class is nonempty");
        let (policy, first_values) = cache.get(mdp, f_index, &values.members()[f_index]);
        let policy = policy.clone();
        let suboptimality = v_star[s1] - first_values[s1];
        for h in 1..=horizon {
            let rollout = Policy::compose(policy.clone(), reference.clone(), h);
            let tau = mdp::sample_trajectory(mdp, &rollout, &mut rng);
            let labels = mdp::process_rewards(mdp, &tau);
            trace.visit(&tau);
            tally.add_process(&tau, &labels);
        }
        trace.record(&policy, IterationRecord { t, f_index, r_index: None, suboptimality, episodes: horizon });
    }
    Ok(trace.finish(mdp, j_star))
}

/// Outcome of [`run_round_robin_outcome`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRobinResult {
    /// Recommended arm after each episode.
    pub recommendations: Vec<usize>,
    pub pulls: Vec<u64>,
    pub reward_sums: Vec<f64>,
}

impl RoundRobinResult {
    /// Arm recommended once the whole budget is spent.
    pub fn final_recommendation(&self) -> usize {
        *self.recommendations.last().unwrap_or(&0)
    }
}

/// Pulls arm policies in turn with outcome feedback and recommends the
/// highest empirical mean (lowest index on ties; unpulled arms rank last).
pub fn run_round_robin_outcome(
    mdp: &TabularMdp,
    arms: &[Policy],
    budget: usize,
    channel: OutcomeChannel,
    seed: u64,
) -> Result<RoundRobinResult> {
    if arms.is_empty() {
        return Err(Error::Empty("arm set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pulls = vec![0u64; arms.len()];
    let mut reward_sums = vec![0.0; arms.len()];
    let mut recommendations = Vec::with_capacity(budget);
    for episode in 0..budget {
        let arm = episode % arms.len();
        let tau = mdp::sample_trajectory(mdp, &arms[arm], &mut rng);
        reward_sums[arm] += mdp::sample_outcome_reward(mdp, &tau, channel, &mut rng)?;
        pulls[arm] += 1;
        let means = pulls
            .iter()
            .zip(&reward_sums)
            .map(|(&n, &sum)| if n == 0 { f64::NEG_INFINITY } else { sum / n as f64 });
        recommendations.push(argmax_lowest(means).expect("arms are nonempty").0);
    }
    Ok(RoundRobinResult { recommendations, pulls, reward_sums })
}
