#![allow(dead_code)]

use outcome_rl_core::env::{build_random_tabular, RandomTabularSpec};
use outcome_rl_core::mdp::{MarkovPolicy, Policy, Shape, StepTable, TabularMdp, Trajectory};

pub fn random_mdp(num_states: usize, num_actions: usize, horizon: usize, seed: u64) -> TabularMdp {
    build_random_tabular(RandomTabularSpec { num_states, num_actions, horizon, reward_scale: 1.0, seed })
        .expect("valid spec")
}

/// Every deterministic Markov policy of the shape.
pub fn all_markov_policies(shape: Shape) -> Vec<Policy> {
    let cells = shape.horizon * shape.num_states;
    let count = shape.num_actions.pow(cells as u32);
    (0..count)
        .map(|mut code| {
            let actions = (0..cells)
                .map(|_| {
                    let a = code % shape.num_actions;
                    code /= shape.num_actions;
                    a
                })
                .collect();
            MarkovPolicy::new(shape, actions).expect("in range").into()
        })
        .collect()
}

/// `J(π)` by recursion over the tree of trajectories.
pub fn tree_value(mdp: &TabularMdp, policy: &Policy, reward: &StepTable) -> f64 {
    fn go(mdp: &TabularMdp, policy: &Policy, reward: &StepTable, h: usize, s: usize) -> f64 {
        let a = policy.action(h, s);
        let mut v = reward.get(h, s, a);
        if h + 1 < mdp.horizon() {
            for (s2, &p) in mdp.transition(h, s, a).iter().enumerate() {
                if p > 0.0 {
                    v += p * go(mdp, policy, reward, h + 1, s2);
                }
            }
        }
        v
    }
    mdp.initial_dist()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, &p)| p * go(mdp, policy, reward, 0, s))
        .sum()
}

/// Probability of a trajectory under `π`, multiplying along the path.
pub fn path_probability(mdp: &TabularMdp, policy: &Policy, tau: &Trajectory) -> f64 {
    let steps = tau.steps();
    let mut p = mdp.initial_dist()[steps[0].0];
    for (h, &(s, a)) in steps.iter().enumerate() {
        if policy.action(h, s) != a {
            return 0.0;
        }
        if let Some(&(s2, _)) = steps.get(h + 1) {
            p *= mdp.transition(h, s, a)[s2];
        }
    }
    p
}
