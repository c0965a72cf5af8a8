use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax_lowest, fixed_start, optimal_values, AlgoConfig, GreedyCache, IterationRecord, RunTrace, TraceBuilder};
use crate::classes::{ComparatorClass, QClass, RewardClass};
use crate::error::Result;
use crate::losses::{PreferenceTally, RewardSource};
use crate::mdp::{self, Policy, StepTable, TabularMdp};

/// `λ [f_1(s_1) − V̂_ref(R)] − L_BE(f; R) − L_PbRM(R)` from sufficient statistics.
///
/// The Bellman term runs over both trajectories of every recorded pair.
pub fn preference_objective(
    f: &StepTable,
    reward: &StepTable,
    comparators: &ComparatorClass,
    tally: &PreferenceTally,
    lambda: f64,
    beta: f64,
    initial_state: usize,
) -> f64 {
    lambda * (f.state_max(0, initial_state) - tally.v_ref_hat(reward))
        - tally.trajectories().loss_be(f, RewardSource::Table(reward), comparators)
        - tally.loss_pbrm(reward, beta)
}

fn preference_argmax(
    values: &QClass,
    rewards: &RewardClass,
    comparators: &ComparatorClass,
    tally: &PreferenceTally,
    cfg: &AlgoConfig,
    s1: usize,
) -> (usize, usize) {
    // reward-only terms are shared across every f
    let reward_terms: Vec<f64> = rewards
        .members()
        .iter()
        .map(|r| -cfg.lambda * tally.v_ref_hat(r) - tally.loss_pbrm(r, cfg.beta_btl))
        .collect();
    let bellman = tally.trajectories();
    let objectives = values.members().iter().flat_map(|f| {
        let optimism = cfg.lambda * f.state_max(0, s1);
        rewards.members().iter().zip(&reward_terms).map(move |(r, rt)| {
            optimism + rt - bellman.loss_be(f, RewardSource::Table(r), comparators)
        })
    });
    let (flat, _) = argmax_lowest(objectives).expect("classes are nonempty");
    (flat / rewards.len(), flat % rewards.len())
}

/// Optimism with Bradley-Terry preference feedback.
///
/// For every `h`, compares a roll-out of `π^(t) ∘_h π_ref` against a fresh
/// roll-out of `π_ref`; each comparison counts as one episode.
pub fn run_algorithm3(
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
    let mut tally = PreferenceTally::new();
    let mut cache = GreedyCache::new(values.len());
    let mut trace = TraceBuilder::new(mdp.shape(), cfg.iterations);

    for t in 1..=cfg.iterations {
        let (f_index, r_index) = preference_argmax(values, rewards, comparators, &tally, cfg, s1);
        let (policy, first_values) = cache.get(mdp, f_index, &values.members()[f_index]);
        let policy = policy.clone();
        let suboptimality = v_star[s1] - first_values[s1];
        for h in 1..=horizon {
            let rollout = Policy::compose(policy.clone(), reference.clone(), h);
            let plus = mdp::sample_trajectory(mdp, &rollout, &mut rng);
            let minus = mdp::sample_trajectory(mdp, &reference, &mut rng);
            let preferred = mdp::sample_preference(mdp, &plus, &minus, cfg.beta_btl, &mut rng);
            trace.visit(&plus);
            trace.visit(&minus);
            tally.add(&plus, &minus, preferred);
        }
        trace.record(&policy, IterationRecord { t, f_index, r_index: Some(r_index), suboptimality, episodes: horizon });
    }
    Ok(trace.finish(mdp, j_star))
}
