//! Coverability of a finite policy class.
//!
//! For each step, `min_μ max_{π,s,a} d^π_h(s,a) / μ(s,a)` is attained by
//! `μ ∝ max_π d^π_h`, and its value is `Σ_{s,a} max_π d^π_h(s,a)`. The
//! coefficient is the largest such value over steps.
//! [`coverability_bisection_oracle`] certifies the same number by bisecting on
//! feasibility of an explicit covering distribution.

use alloc::vec::Vec;

use crate::classes::QClass;
use crate::error::{Error, Result};
use crate::mdp::{self, Policy, StepTable, TabularMdp};

/// Nonempty ordered set of policies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySet {
    members: Vec<Policy>,
}

impl PolicySet {
    pub fn new(members: Vec<Policy>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Empty("policy set"));
        }
        Ok(Self { members })
    }

    /// `Π_F`.
    pub fn greedy_of(class: &QClass) -> Self {
        Self { members: class.greedy_policies().into_iter().map(Policy::from).collect() }
    }

    pub fn members(&self) -> &[Policy] {
        &self.members
    }
}

/// Per-step coverability values and the optimal covering distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverabilityReport {
    pub value: f64,
    /// `Σ_{s,a} max_π d^π_h(s,a)` for each step.
    pub layer_values: Vec<f64>,
    /// `μ_h ∝ max_π d^π_h`, each layer normalised.
    pub witness: StepTable,
}

fn max_occupancy(mdp: &TabularMdp, policies: &PolicySet) -> StepTable {
    let mut envelope = StepTable::zeros(mdp.shape());
    for policy in policies.members() {
        let d = mdp::occupancy(mdp, policy);
        envelope = envelope.zip_with(&d, f64::max);
    }
    envelope
}

pub fn coverability_report(mdp: &TabularMdp, policies: &PolicySet) -> CoverabilityReport {
    let shape = mdp.shape();
    let envelope = max_occupancy(mdp, policies);
    let members = policies.members();
    let single = members.iter().all(|p| p.to_markov(shape) == members[0].to_markov(shape));
    // one policy covers itself exactly; skip the round-off of summing a layer
    let layer_values: Vec<f64> = (0..shape.horizon)
        .map(|h| if single { 1.0 } else { envelope.layer(h).iter().sum() })
        .collect();
    let witness = StepTable::from_fn(shape, |h, s, a| envelope.get(h, s, a) / layer_values[h]);
    let value = layer_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    CoverabilityReport { value, layer_values, witness }
}

/// `C_cov(Π; M)`.
pub fn coverability(mdp: &TabularMdp, policies: &PolicySet) -> f64 {
    coverability_report(mdp, policies).value
}

/// `max_{h,π,s,a} d^π_h(s,a) / μ_h(s,a)` for a given covering table, with
/// `0/0 = 0` and `x/0 = ∞` for `x > 0`.
pub fn covering_ratio(mdp: &TabularMdp, policies: &PolicySet, mu: &StepTable) -> f64 {
    let mut worst: f64 = 0.0;
    for policy in policies.members() {
        let d = mdp::occupancy(mdp, policy);
        for (&x, &m) in d.as_flat().iter().zip(mu.as_flat()) {
            let ratio = if x == 0.0 {
                0.0
            } else if m == 0.0 {
                f64::INFINITY
            } else {
                x / m
            };
            worst = worst.max(ratio);
        }
    }
    worst
}

/// Bisects on `t`: for each step, the minimal cell masses needed to cover every
/// occupancy at ratio `t` are `max_π d^π_h / t`; `t` is feasible when those
/// masses fit in a probability vector, which is then completed and checked
/// against the ratio directly.
pub fn coverability_bisection_oracle(mdp: &TabularMdp, policies: &PolicySet, tol: f64) -> f64 {
    let shape = mdp.shape();
    let occupancies: Vec<StepTable> =
        policies.members().iter().map(|p| mdp::occupancy(mdp, p)).collect();
    let feasible = |t: f64| -> bool {
        for h in 0..shape.horizon {
            let need: Vec<f64> = (0..shape.layer_len())
                .map(|i| {
                    occupancies.iter().map(|d| d.layer(h)[i]).fold(0.0, f64::max) / t
                })
                .collect();
            let mass: f64 = need.iter().sum();
            if mass > 1.0 {
                return false;
            }
            // spread the slack uniformly and verify the ratio bound
            let slack = (1.0 - mass) / shape.layer_len() as f64;
            for d in &occupancies {
                for (i, &x) in d.layer(h).iter().enumerate() {
                    let mu = need[i] + slack;
                    if x > 0.0 && x > t * mu * (1.0 + 1e-15) {
                        return false;
                    }
                }
            }
        }
        true
    };
    let mut lo = 0.0;
    let mut hi = shape.layer_len() as f64;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `C'_cov = E_{s_1∼ρ} C_cov(Π; M_{s_1})`.
pub fn coverability_prime(mdp: &TabularMdp, policies: &PolicySet) -> Result<f64> {
    let mut total = 0.0;
    for (s, &p) in mdp.initial_dist().iter().enumerate() {
        if p > 0.0 {
            total += p * coverability(&mdp.with_initial_state(s)?, policies);
        }
    }
    Ok(total)
}
