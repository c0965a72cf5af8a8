//! Exact evaluation of the performance-difference decompositions.
//!
//! All expectations are taken by forward dynamic programming over the layered
//! state distribution, so the identities can be checked to round-off.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{self, Policy, StepTable, TabularMdp};

/// The three sides of the trajectory-level performance-difference identity
/// `lhs = bellman_term + reward_term`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfDiffTerms {
    /// `E_{s_1}[max_a f_1(s_1, a)] − J(π)`.
    pub lhs: f64,
    /// `Σ_h E^π[f_h − T_{R,h} f_{h+1}]` with the proxy reward `R`.
    pub bellman_term: f64,
    /// `E^π[R(τ) − R⋆(τ)]`.
    pub reward_term: f64,
}

impl PerfDiffTerms {
    pub fn residual(&self) -> f64 {
        self.lhs - self.bellman_term - self.reward_term
    }
}

/// Computes every term of the decomposition for `(f, R_proxy, π)`.
///
/// The identity is exact when `π` is greedy with respect to `f` at every step
/// (the telescoping argument needs `f_h(s_h, π_h(s_h)) = max_a f_h(s_h, a)`).
/// For other policies the three terms are still exact, but they need not add up.
pub fn perf_diff_decomposition(
    mdp: &TabularMdp,
    f: &StepTable,
    reward_proxy: &StepTable,
    policy: &Policy,
) -> PerfDiffTerms {
    let shape = mdp.shape();
    let d = mdp::occupancy(mdp, policy);
    let initial_value: f64 = mdp
        .initial_dist()
        .iter()
        .enumerate()
        .map(|(s, &p)| p * f.state_max(0, s))
        .sum();
    let lhs = initial_value - mdp::policy_value(mdp, policy).value;

    let mut bellman_term = 0.0;
    let mut reward_term = 0.0;
    for h in 0..shape.horizon {
        let backup = mdp::bellman_backup(mdp, reward_proxy, f, h);
        for s in 0..shape.num_states {
            for a in 0..shape.num_actions {
                let w = d.get(h, s, a);
                if w == 0.0 {
                    continue;
                }
                bellman_term += w * (f.get(h, s, a) - backup[s * shape.num_actions + a]);
                reward_term += w * (reward_proxy.get(h, s, a) - mdp.mean_reward().get(h, s, a));
            }
        }
    }
    PerfDiffTerms { lhs, bellman_term, reward_term }
}

/// Both sides of the trajectory-decomposition inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajDecomp {
    /// `Σ_h E^π (D_h(s_h,a_h) + D̄_{h+1}(s_{h+1}) − D̄_h(s_h))²`.
    pub lhs: f64,
    /// `4 Σ_h E^{π ∘_h π_ref} D(τ)²`.
    pub rhs: f64,
}

/// `D̄_h(s) = E^{π_ref}[Σ_{ℓ≥h} D_ℓ | s_h = s]` for steps after the first,
/// with `D̄ = 0` at the first step and past the horizon. Row-major `(h, s)`
/// with `horizon + 1` rows.
pub fn reference_tail_values(mdp: &TabularMdp, diff: &StepTable, reference: &Policy) -> Vec<f64> {
    let shape = mdp.shape();
    let ns = shape.num_states;
    let mut tail = vec![0.0; (shape.horizon + 1) * ns];
    for h in (0..shape.horizon).rev() {
        for s in 0..ns {
            let a = reference.action(h, s);
            let future = if h + 1 < shape.horizon {
                mdp.transition(h, s, a)
                    .iter()
                    .zip(&tail[(h + 1) * ns..(h + 2) * ns])
                    .map(|(p, v)| p * v)
                    .sum()
            } else {
                0.0
            };
            tail[h * ns + s] = diff.get(h, s, a) + future;
        }
    }
    for slot in &mut tail[..ns] {
        *slot = 0.0;
    }
    tail
}

/// Exact `E^π[D(τ)²]` by propagating the zeroth, first and second moments of
/// the running partial sum through the layered state distribution.
pub fn trajectory_second_moment(mdp: &TabularMdp, policy: &Policy, diff: &StepTable) -> f64 {
    let shape = mdp.shape();
    let ns = shape.num_states;
    let mut mass = mdp.initial_dist().to_vec();
    let mut first = vec![0.0; ns];
    let mut second = vec![0.0; ns];
    for h in 0..shape.horizon {
        let last = h + 1 == shape.horizon;
        let mut next_mass = vec![0.0; ns];
        let mut next_first = vec![0.0; ns];
        let mut next_second = vec![0.0; ns];
        let mut total = 0.0;
        for s in 0..ns {
            if mass[s] == 0.0 {
                continue;
            }
            let a = policy.action(h, s);
            let x = diff.get(h, s, a);
            let m1 = first[s] + x * mass[s];
            let m2 = second[s] + 2.0 * x * first[s] + x * x * mass[s];
            if last {
                total += m2;
                continue;
            }
            for (s2, &p) in mdp.transition(h, s, a).iter().enumerate() {
                if p > 0.0 {
                    next_mass[s2] += p * mass[s];
                    next_first[s2] += p * m1;
                    next_second[s2] += p * m2;
                }
            }
        }
        if last {
            return total;
        }
        mass = next_mass;
        first = next_first;
        second = next_second;
    }
    0.0
}

/// Evaluates both sides of the trajectory-decomposition inequality.
pub fn traj_decomp_check(
    mdp: &TabularMdp,
    diff: &StepTable,
    policy: &Policy,
    reference: &Policy,
) -> TrajDecomp {
    let shape = mdp.shape();
    let ns = shape.num_states;
    let tail = reference_tail_values(mdp, diff, reference);
    let states = mdp::state_distribution(mdp, policy);

    let mut lhs = 0.0;
    for h in 0..shape.horizon {
        for s in 0..ns {
            let p = states[h * ns + s];
            if p == 0.0 {
                continue;
            }
            let a = policy.action(h, s);
            let base = diff.get(h, s, a) - tail[h * ns + s];
            if h + 1 < shape.horizon {
                for (s2, &t) in mdp.transition(h, s, a).iter().enumerate() {
                    if t > 0.0 {
                        let e = base + tail[(h + 1) * ns + s2];
                        lhs += p * t * e * e;
                    }
                }
            } else {
                lhs += p * base * base;
            }
        }
    }

    let rhs = 4.0
        * (1..=shape.horizon)
            .map(|k| {
                let rolled = Policy::compose(policy.clone(), reference.clone(), k);
                trajectory_second_moment(mdp, &rolled, diff)
            })
            .sum::<f64>();
    TrajDecomp { lhs, rhs }
}
