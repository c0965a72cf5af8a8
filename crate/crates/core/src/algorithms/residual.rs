use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax_lowest, optimal_values, AlgoConfig, GreedyCache, IterationRecord, RunTrace, TraceBuilder};
use crate::classes::QClass;
use crate::error::{Error, Result};
use crate::losses::TrajectoryTally;
use crate::mdp::{self, TabularMdp};

/// Optimism with the Bellman-residual loss for deterministic dynamics.
///
/// Each iteration draws its own start state from `ρ`, plays the greedy policy
/// of `argmax_f λ f_1(s^(t)) − L_DBE(f)` for one episode, and records the
/// suboptimality at that start state.
pub fn run_algorithm2(mdp: &TabularMdp, values: &QClass, cfg: &AlgoConfig) -> Result<RunTrace> {
    cfg.validate()?;
    if let Some((h, s, a)) = mdp.first_stochastic_row() {
        return Err(Error::NonDeterministic { h, s, a });
    }
    let (v_star, j_star) = optimal_values(mdp);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tally = TrajectoryTally::new();
    let mut cache = GreedyCache::new(values.len());
    let mut trace = TraceBuilder::new(mdp.shape(), cfg.iterations);

    for t in 1..=cfg.iterations {
        let s1 = mdp::sample_index(mdp.initial_dist(), &mut rng);
        let objectives = values
            .members()
            .iter()
            .map(|f| cfg.lambda * f.state_max(0, s1) - tally.loss_dbe(f));
        let (f_index, _) = argmax_lowest(objectives).expect("class is nonempty");
        let (policy, first_values) = cache.get(mdp, f_index, &values.members()[f_index]);
        let policy = policy.clone();
        let suboptimality = v_star[s1] - first_values[s1];
        let tau = mdp::sample_trajectory_from(mdp, &policy, s1, &mut rng);
        let r = mdp::sample_outcome_reward(mdp, &tau, cfg.outcome_channel, &mut rng)?;
        trace.visit(&tau);
        tally.add_outcome(&tau, r);
        trace.record(&policy, IterationRecord { t, f_index, r_index: None, suboptimality, episodes: 1 });
    }
    Ok(trace.finish(mdp, j_star))
}
