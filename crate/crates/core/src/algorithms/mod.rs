//! Optimistic learners for outcome and preference feedback, and the two
//! baselines they are compared against.
//!
//! Every learner enumerates its finite classes exactly. Argmax ties (up to
//! [`math::TIE_TOLERANCE`](crate::math::TIE_TOLERANCE)) go to the lowest
//! index; the fitted-reward baseline is the one exception and resolves its
//! reward fit toward the highest index.

mod baselines;
mod joint;
mod preference;
mod residual;

use alloc::vec::Vec;

pub use baselines::{run_fitted_reward_baseline, run_process_reward_baseline, run_round_robin_outcome, RoundRobinResult};
pub use joint::{joint_objective, joint_optimize, run_algorithm1, JointChoice};
pub use preference::{preference_objective, run_algorithm3};
pub use residual::run_algorithm2;

use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{self, MarkovPolicy, OutcomeChannel, Policy, Shape, StepTable, TabularMdp, Trajectory};

/// Learner hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlgoConfig {
    /// Weight `λ ≥ 0` on the optimistic value.
    pub lambda: f64,
    /// Number of iterations `T ≥ 1`.
    pub iterations: usize,
    /// BTL temperature `β > 0` (preference learner only).
    pub beta_btl: f64,
    /// Confidence radius of the fitted-reward baseline; `∞` keeps every member.
    pub beta_conf: f64,
    pub seed: u64,
    /// Roll-out policy `π_ref`; `None` plays action 0 everywhere.
    pub ref_policy: Option<Policy>,
    pub outcome_channel: OutcomeChannel,
}

impl AlgoConfig {
    pub fn new(lambda: f64, iterations: usize) -> Self {
        Self {
            lambda,
            iterations,
            beta_btl: 1.0,
            beta_conf: f64::INFINITY,
            seed: 0,
            ref_policy: None,
            outcome_channel: OutcomeChannel::Bernoulli,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be finite and nonnegative".into()));
        }
        if !(self.beta_btl > 0.0 && self.beta_btl.is_finite()) {
            return Err(Error::InvalidParameter("beta_btl must be finite and positive".into()));
        }
        if self.beta_conf.is_nan() || self.beta_conf < 0.0 {
            return Err(Error::InvalidParameter("beta_conf must be nonnegative".into()));
        }
        if let OutcomeChannel::ClippedGaussian { sigma } = self.outcome_channel {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidParameter("sigma must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }

    /// The reference policy for an MDP of the given shape.
    pub fn reference(&self, shape: Shape) -> Policy {
        self.ref_policy
            .clone()
            .unwrap_or_else(|| MarkovPolicy::constant(shape, 0).expect("action 0 exists").into())
    }
}

/// One iteration of a learner.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub t: usize,
    pub f_index: usize,
    pub r_index: Option<usize>,
    /// Exact `V⋆(s_1) − V^{π^(t)}(s_1)` at this iteration's start state.
    pub suboptimality: f64,
    /// Environment episodes consumed by this iteration.
    pub episodes: usize,
}

/// Uniform mixture over the policies played, stored with multiplicities.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicyMixture {
    components: Vec<(Policy, usize)>,
    total: usize,
}

impl PolicyMixture {
    pub fn push(&mut self, policy: &Policy) {
        self.total += 1;
        match self.components.iter_mut().find(|(p, _)| p == policy) {
            Some((_, n)) => *n += 1,
            None => self.components.push((policy.clone(), 1)),
        }
    }

    pub fn components(&self) -> &[(Policy, usize)] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Mixture occupancy `Σ_i w_i d^{π_i}`.
    pub fn occupancy(&self, mdp: &TabularMdp) -> StepTable {
        let mut acc = StepTable::zeros(mdp.shape());
        for (policy, n) in &self.components {
            let w = *n as f64 / self.total as f64;
            let d = mdp::occupancy(mdp, policy);
            acc = acc.zip_with(&d, |x, y| x + w * y);
        }
        acc
    }

    /// `J` of the mixture, evaluated through its occupancy.
    pub fn value(&self, mdp: &TabularMdp) -> f64 {
        self.occupancy(mdp)
            .as_flat()
            .iter()
            .zip(mdp.mean_reward().as_flat())
            .map(|(d, r)| d * r)
            .sum()
    }
}

/// Output of a learner run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    /// `Unif(π^(1..T))`.
    pub output_policy: PolicyMixture,
    /// `J(π⋆) − J(π̂)` for the output mixture.
    pub output_suboptimality: f64,
    /// How often each `(h, s, a)` appeared in collected trajectories.
    pub visits: StepTable,
}

impl RunTrace {
    pub fn total_episodes(&self) -> usize {
        self.records.iter().map(|r| r.episodes).sum()
    }

    pub fn visit_count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits.get(h, s, a) as u64
    }

    pub fn mean_suboptimality(&self) -> f64 {
        self.records.iter().map(|r| r.suboptimality).sum::<f64>() / self.records.len() as f64
    }
}

/// Bookkeeping shared by every learner loop.
struct TraceBuilder {
    records: Vec<IterationRecord>,
    mixture: PolicyMixture,
    visits: StepTable,
}

impl TraceBuilder {
    fn new(shape: Shape, iterations: usize) -> Self {
        Self {
            records: Vec::with_capacity(iterations),
            mixture: PolicyMixture::default(),
            visits: StepTable::zeros(shape),
        }
    }

    fn visit(&mut self, trajectory: &Trajectory) {
        for (h, &(s, a)) in trajectory.steps().iter().enumerate() {
            let n = self.visits.get(h, s, a);
            self.visits.set(h, s, a, n + 1.0);
        }
    }

    fn record(&mut self, policy: &Policy, record: IterationRecord) {
        self.mixture.push(policy);
        self.records.push(record);
    }

    fn finish(self, mdp: &TabularMdp, optimal_value: f64) -> RunTrace {
        let output_suboptimality = optimal_value - self.mixture.value(mdp);
        RunTrace { records: self.records, output_policy: self.mixture, output_suboptimality, visits: self.visits }
    }
}

/// Caches greedy policies and their exact values per class member.
struct GreedyCache {
    policies: Vec<Option<(Policy, PolicyStateValues)>>,
}

/// `V^π_1(s)` for every start state, plus `J(π)`.
#[derive(Clone)]
struct PolicyStateValues {
    first_step: Vec<f64>,
}

impl GreedyCache {
    fn new(size: usize) -> Self {
        Self { policies: (0..size).map(|_| None).collect() }
    }

    fn get(&mut self, mdp: &TabularMdp, index: usize, f: &StepTable) -> (&Policy, &[f64]) {
        let slot = &mut self.policies[index];
        if slot.is_none() {
            let policy = Policy::from(mdp::greedy(f));
            let eval = mdp::policy_value(mdp, &policy);
            let first_step = (0..mdp.num_states()).map(|s| eval.state_value(0, s)).collect();
            *slot = Some((policy, PolicyStateValues { first_step }));
        }
        let (p, v) = slot.as_ref().expect("filled above");
        (p, &v.first_step)
    }
}

/// `V⋆_1(s)` for every state and `J(π⋆)`.
fn optimal_values(mdp: &TabularMdp) -> (Vec<f64>, f64) {
    let q = mdp::optimal_q(mdp);
    let v: Vec<f64> = (0..mdp.num_states()).map(|s| q.state_max(0, s)).collect();
    let j = v.iter().zip(mdp.initial_dist()).map(|(x, p)| x * p).sum();
    (v, j)
}

/// Lowest index among near-maximal values.
fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b || math::nearly_equal(v, b) => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Highest index among near-minimal values.
fn argmin_highest(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v > b && !math::nearly_equal(v, b) => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

fn fixed_start(mdp: &TabularMdp) -> Result<usize> {
    mdp.fixed_initial_state().ok_or(Error::RandomInitialState)
}
