//! Finite-horizon tabular MDPs and the exact oracles built on them.
//!
//! Steps are 0-based throughout: step `h` ranges over `0..horizon`, and the
//! transition kernel is defined for `h < horizon - 1`. Value tables follow the
//! convention that the table one past the last step is identically zero.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;

/// Tolerance for probability vectors to sum to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Dimensions shared by an MDP and every table defined over it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Shape {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
}

impl Shape {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::Shape(format!(
                "dimensions must be positive, got |S|={num_states}, |A|={num_actions}, H={horizon}"
            )));
        }
        Ok(Self { num_states, num_actions, horizon })
    }

    /// Number of (state, action) cells in one step.
    pub fn layer_len(&self) -> usize {
        self.num_states * self.num_actions
    }

    /// Number of entries in a full `(h, s, a)` table.
    pub fn table_len(&self) -> usize {
        self.horizon * self.layer_len()
    }

    fn index(&self, h: usize, s: usize, a: usize) -> usize {
        debug_assert!(h < self.horizon && s < self.num_states && a < self.num_actions);
        (h * self.num_states + s) * self.num_actions + a
    }
}

/// A real-valued table indexed by `(h, s, a)`.
///
/// The same type carries Q-functions, reward functions, occupancy measures and
/// arbitrary per-step difference functions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepTable {
    shape: Shape,
    values: Vec<f64>,
}

/// Q-style table; `V_{H+1} = 0` is implied.
pub type ValueTable = StepTable;

impl StepTable {
    pub fn zeros(shape: Shape) -> Self {
        Self { shape, values: vec![0.0; shape.table_len()] }
    }

    pub fn constant(shape: Shape, value: f64) -> Self {
        Self { shape, values: vec![value; shape.table_len()] }
    }

    /// Builds a table from a flat row-major `(h, s, a)` vector.
    pub fn from_flat(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.table_len() {
            return Err(Error::Shape(format!(
                "table needs {} entries, got {}",
                shape.table_len(),
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(shape.table_len());
        for h in 0..shape.horizon {
            for s in 0..shape.num_states {
                for a in 0..shape.num_actions {
                    values.push(f(h, s, a));
                }
            }
        }
        Self { shape, values }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[self.shape.index(h, s, a)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, s: usize, a: usize, value: f64) {
        let i = self.shape.index(h, s, a);
        self.values[i] = value;
    }

    /// The `|A|` entries of state `s` at step `h`.
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.shape.index(h, s, 0);
        &self.values[start..start + self.shape.num_actions]
    }

    /// The `|S|·|A|` entries of step `h`.
    pub fn layer(&self, h: usize) -> &[f64] {
        let start = h * self.shape.layer_len();
        &self.values[start..start + self.shape.layer_len()]
    }

    /// `max_a f_h(s, a)`; zero for `h == horizon`.
    pub fn state_max(&self, h: usize, s: usize) -> f64 {
        if h >= self.shape.horizon {
            return 0.0;
        }
        self.row(h, s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index maximiser of `f_h(s, ·)`.
    pub fn argmax_action(&self, h: usize, s: usize) -> usize {
        let row = self.row(h, s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// Sum of the table along a trajectory, `Σ_h f_h(s_h, a_h)`.
    pub fn trajectory_sum(&self, trajectory: &Trajectory) -> f64 {
        trajectory.steps().iter().enumerate().map(|(h, &(s, a))| self.get(h, s, a)).sum()
    }

    /// `max_{h,s,a} |self - other|`.
    pub fn sup_distance(&self, other: &StepTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| libm::fabs(x - y))
            .fold(0.0, f64::max)
    }

    /// `max_{s,a} |self_h - other|` for a single step.
    pub fn layer_sup_distance(&self, h: usize, other_layer: &[f64]) -> f64 {
        self.layer(h)
            .iter()
            .zip(other_layer)
            .map(|(x, y)| libm::fabs(x - y))
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &StepTable, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self {
            shape: self.shape,
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect(),
        }
    }
}

/// `τ = (s_1, a_1, …, s_H, a_H)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    steps: Vec<(usize, usize)>,
}

impl Trajectory {
    /// Checks length and index ranges against `shape`.
    pub fn new(shape: Shape, steps: Vec<(usize, usize)>) -> Result<Self> {
        if steps.len() != shape.horizon {
            return Err(Error::Shape(format!(
                "trajectory has {} steps, horizon is {}",
                steps.len(),
                shape.horizon
            )));
        }
        if let Some(&(s, a)) =
            steps.iter().find(|&&(s, a)| s >= shape.num_states || a >= shape.num_actions)
        {
            return Err(Error::Shape(format!("trajectory step ({s}, {a}) out of range")));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// State at step `h`, or `None` past the horizon (the terminal state).
    pub fn state(&self, h: usize) -> Option<usize> {
        self.steps.get(h).map(|&(s, _)| s)
    }

    pub fn contains(&self, h: usize, s: usize, a: usize) -> bool {
        self.steps.get(h) == Some(&(s, a))
    }
}

/// Deterministic Markov policy `π_h(s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarkovPolicy {
    num_states: usize,
    actions: Vec<usize>,
}

impl MarkovPolicy {
    /// `actions` is row-major `(h, s)`.
    pub fn new(shape: Shape, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != shape.horizon * shape.num_states {
            return Err(Error::Shape(format!(
                "policy needs {} entries, got {}",
                shape.horizon * shape.num_states,
                actions.len()
            )));
        }
        if actions.iter().any(|&a| a >= shape.num_actions) {
            return Err(Error::Shape("policy action out of range".into()));
        }
        Ok(Self { num_states: shape.num_states, actions })
    }

    /// Plays `action` everywhere.
    pub fn constant(shape: Shape, action: usize) -> Result<Self> {
        Self::new(shape, vec![action; shape.horizon * shape.num_states])
    }

    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.num_states + s]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }
}

/// A policy that can be executed step by step.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Policy {
    Markov(MarkovPolicy),
    /// Follows `front` for the first `switch_step` steps and `back` afterwards.
    Composed { front: Box<Policy>, back: Box<Policy>, switch_step: usize },
}

impl Policy {
    /// `front ∘_h back`: run `front` for steps `1..=h`, then `back`.
    pub fn compose(front: Policy, back: Policy, switch_step: usize) -> Self {
        Policy::Composed { front: Box::new(front), back: Box::new(back), switch_step }
    }

    /// Action at 0-based step `h`.
    pub fn action(&self, h: usize, s: usize) -> usize {
        match self {
            Policy::Markov(p) => p.action(h, s),
            Policy::Composed { front, back, switch_step } => {
                if h < *switch_step {
                    front.action(h, s)
                } else {
                    back.action(h, s)
                }
            }
        }
    }

    /// Flattens the policy into its Markov table.
    pub fn to_markov(&self, shape: Shape) -> MarkovPolicy {
        let mut actions = Vec::with_capacity(shape.horizon * shape.num_states);
        for h in 0..shape.horizon {
            for s in 0..shape.num_states {
                actions.push(self.action(h, s));
            }
        }
        MarkovPolicy { num_states: shape.num_states, actions }
    }
}

impl From<MarkovPolicy> for Policy {
    fn from(p: MarkovPolicy) -> Self {
        Policy::Markov(p)
    }
}

/// Discriminant of [`FeedbackSample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FeedbackKind {
    Process,
    Outcome,
    Preference,
}

impl fmt::Display for FeedbackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackKind::Process => "process",
            FeedbackKind::Outcome => "outcome",
            FeedbackKind::Preference => "preference",
        })
    }
}

/// One observation from the environment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FeedbackSample {
    /// Per-step rewards `(r_1, …, r_H)`.
    Process { trajectory: Trajectory, rewards: Vec<f64> },
    /// A single scalar for the whole trajectory.
    Outcome { trajectory: Trajectory, reward: f64 },
    /// `preferred` is true when `plus` won the comparison (`y = 1`).
    Preference { plus: Trajectory, minus: Trajectory, preferred: bool },
}

impl FeedbackSample {
    pub fn kind(&self) -> FeedbackKind {
        match self {
            FeedbackSample::Process { .. } => FeedbackKind::Process,
            FeedbackSample::Outcome { .. } => FeedbackKind::Outcome,
            FeedbackSample::Preference { .. } => FeedbackKind::Preference,
        }
    }
}

/// How the scalar outcome reward is drawn given `R⋆(τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum OutcomeChannel {
    /// `r ~ Bern(R⋆(τ))`.
    #[default]
    Bernoulli,
    /// `r = clip(R⋆(τ) + σ·z, 0, 1)`. Clipping biases the mean near the
    /// boundary.
    ClippedGaussian { sigma: f64 },
    /// `r = R⋆(τ)`.
    Noiseless,
}

/// Finite-horizon tabular MDP `(S, A, T, ρ, R⋆, H)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TabularMdp {
    shape: Shape,
    /// Row-major `(h, s, a, s')` for `h < H - 1`.
    transitions: Vec<f64>,
    initial_dist: Vec<f64>,
    mean_reward: StepTable,
}

impl TabularMdp {
    /// Validates every invariant: stochastic rows, a stochastic initial
    /// distribution, rewards in `[0, 1]` and total reward in `[0, 1]` along
    /// every trajectory reachable with positive probability.
    pub fn new(
        shape: Shape,
        transitions: Vec<f64>,
        initial_dist: Vec<f64>,
        mean_reward: StepTable,
    ) -> Result<Self> {
        let (ns, na) = (shape.num_states, shape.num_actions);
        let expected = shape.horizon.saturating_sub(1) * ns * na * ns;
        if transitions.len() != expected {
            return Err(Error::Shape(format!(
                "transition tensor needs {expected} entries, got {}",
                transitions.len()
            )));
        }
        if initial_dist.len() != ns {
            return Err(Error::Shape(format!(
                "initial distribution needs {ns} entries, got {}",
                initial_dist.len()
            )));
        }
        if mean_reward.shape() != shape {
            return Err(Error::Shape("reward table shape differs from the MDP".into()));
        }
        if !is_distribution(&initial_dist) {
            return Err(Error::InitialDistribution);
        }
        for (row_index, row) in transitions.chunks(ns).enumerate() {
            if !is_distribution(row) {
                let a = row_index % na;
                let s = (row_index / na) % ns;
                let h = row_index / (na * ns);
                return Err(Error::TransitionRow { h, s, a });
            }
        }
        for h in 0..shape.horizon {
            for s in 0..ns {
                for a in 0..na {
                    let value = mean_reward.get(h, s, a);
                    if !(0.0..=1.0).contains(&value) {
                        return Err(Error::RewardRange { h, s, a, value });
                    }
                }
            }
        }
        let mdp = Self { shape, transitions, initial_dist, mean_reward };
        let max_total = mdp.max_reachable_return();
        if max_total > 1.0 + PROBABILITY_TOLERANCE {
            return Err(Error::Unnormalized(max_total));
        }
        Ok(mdp)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn num_states(&self) -> usize {
        self.shape.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.shape.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn mean_reward(&self) -> &StepTable {
        &self.mean_reward
    }

    pub fn transitions_flat(&self) -> &[f64] {
        &self.transitions
    }

    /// `T_h(· | s, a)`; `h` must be below `horizon - 1`.
    pub fn transition(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let ns = self.shape.num_states;
        let start = ((h * ns + s) * self.shape.num_actions + a) * ns;
        &self.transitions[start..start + ns]
    }

    /// The same dynamics and rewards started deterministically from `state`.
    pub fn with_initial_state(&self, state: usize) -> Result<Self> {
        if state >= self.shape.num_states {
            return Err(Error::Shape(format!("initial state {state} out of range")));
        }
        let mut dist = vec![0.0; self.shape.num_states];
        dist[state] = 1.0;
        Ok(Self { initial_dist: dist, ..self.clone() })
    }

    /// Same dynamics with a different reward table (validated).
    pub fn with_reward(&self, reward: StepTable) -> Result<Self> {
        Self::new(self.shape, self.transitions.clone(), self.initial_dist.clone(), reward)
    }

    /// The unique initial state when `ρ` is a point mass.
    pub fn fixed_initial_state(&self) -> Option<usize> {
        let mut support = self.initial_dist.iter().enumerate().filter(|(_, &p)| p > 0.0);
        let (s, _) = support.next()?;
        support.next().is_none().then_some(s)
    }

    /// True when every transition row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.first_stochastic_row().is_none()
    }

    pub(crate) fn first_stochastic_row(&self) -> Option<(usize, usize, usize)> {
        for h in 0..self.shape.horizon.saturating_sub(1) {
            for s in 0..self.shape.num_states {
                for a in 0..self.shape.num_actions {
                    if self.transition(h, s, a).iter().filter(|&&p| p > 0.0).count() != 1 {
                        return Some((h, s, a));
                    }
                }
            }
        }
        None
    }

    /// Next state under deterministic dynamics; `None` at the last step.
    pub fn deterministic_next(&self, h: usize, s: usize, a: usize) -> Option<usize> {
        if h + 1 >= self.shape.horizon {
            return None;
        }
        self.transition(h, s, a).iter().position(|&p| p > 0.0)
    }

    /// `R⋆(τ) = Σ_h R⋆_h(s_h, a_h)`.
    pub fn trajectory_reward(&self, trajectory: &Trajectory) -> f64 {
        self.mean_reward.trajectory_sum(trajectory)
    }

    /// Largest total mean reward over trajectories with positive probability.
    fn max_reachable_return(&self) -> f64 {
        let (ns, na, horizon) = (self.shape.num_states, self.shape.num_actions, self.shape.horizon);
        let mut next = vec![0.0; ns];
        for h in (0..horizon).rev() {
            let mut current = vec![f64::NEG_INFINITY; ns];
            for (s, slot) in current.iter_mut().enumerate() {
                for a in 0..na {
                    let future = if h + 1 < horizon {
                        self.transition(h, s, a)
                            .iter()
                            .zip(&next)
                            .filter(|(&p, _)| p > 0.0)
                            .map(|(_, &v)| v)
                            .fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        0.0
                    };
                    *slot = slot.max(self.mean_reward.get(h, s, a) + future);
                }
            }
            next = current;
        }
        self.initial_dist
            .iter()
            .zip(&next)
            .filter(|(&p, _)| p > 0.0)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn is_distribution(p: &[f64]) -> bool {
    p.iter().all(|&x| x >= 0.0 && x.is_finite())
        && libm::fabs(p.iter().sum::<f64>() - 1.0) <= PROBABILITY_TOLERANCE
}

/// `[T_{R,h} f_{h+1}](s, a) = R_h(s, a) + E_{s'} max_{a'} f_{h+1}(s', a')` for
/// every `(s, a)`, with `f_{H+1} ≡ 0`. Returned as a flat `|S|·|A|` layer.
pub fn bellman_backup(mdp: &TabularMdp, reward: &StepTable, f: &StepTable, h: usize) -> Vec<f64> {
    let shape = mdp.shape();
    let next_values: Vec<f64> = (0..shape.num_states).map(|s| f.state_max(h + 1, s)).collect();
    bellman_backup_with(mdp, reward, &next_values, h)
}

fn bellman_backup_with(
    mdp: &TabularMdp,
    reward: &StepTable,
    next_values: &[f64],
    h: usize,
) -> Vec<f64> {
    let shape = mdp.shape();
    let mut out = Vec::with_capacity(shape.layer_len());
    for s in 0..shape.num_states {
        for a in 0..shape.num_actions {
            let future = if h + 1 < shape.horizon {
                dot(mdp.transition(h, s, a), next_values)
            } else {
                0.0
            };
            out.push(reward.get(h, s, a) + future);
        }
    }
    out
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Optimal Q-function by backward induction.
pub fn optimal_q(mdp: &TabularMdp) -> ValueTable {
    optimal_q_for_reward(mdp, mdp.mean_reward())
}

/// Backward induction under an arbitrary reward table.
pub fn optimal_q_for_reward(mdp: &TabularMdp, reward: &StepTable) -> ValueTable {
    let shape = mdp.shape();
    let mut q = StepTable::zeros(shape);
    let mut next_values = vec![0.0; shape.num_states];
    for h in (0..shape.horizon).rev() {
        let layer = bellman_backup_with(mdp, reward, &next_values, h);
        for s in 0..shape.num_states {
            for a in 0..shape.num_actions {
                q.set(h, s, a, layer[s * shape.num_actions + a]);
            }
        }
        next_values = (0..shape.num_states).map(|s| q.state_max(h, s)).collect();
    }
    q
}

/// Greedy policy of `f` with lowest-index tie breaking.
pub fn greedy(f: &StepTable) -> MarkovPolicy {
    let shape = f.shape();
    let mut actions = Vec::with_capacity(shape.horizon * shape.num_states);
    for h in 0..shape.horizon {
        for s in 0..shape.num_states {
            actions.push(f.argmax_action(h, s));
        }
    }
    MarkovPolicy { num_states: shape.num_states, actions }
}

/// Exact evaluation of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    /// `J(π) = E_{s_1∼ρ} V^π_1(s_1)`.
    pub value: f64,
    /// `Q^π_h(s, a)`.
    pub q: ValueTable,
    /// `V^π_h(s)`, row-major `(h, s)`.
    pub v: Vec<f64>,
}

impl PolicyEvaluation {
    pub fn state_value(&self, h: usize, s: usize) -> f64 {
        let ns = self.q.shape().num_states;
        self.v[h * ns + s]
    }
}

/// `J(π)` and `V^π`, `Q^π` by backward induction under `R⋆`.
pub fn policy_value(mdp: &TabularMdp, policy: &Policy) -> PolicyEvaluation {
    evaluate_with_reward(mdp, policy, mdp.mean_reward())
}

/// Policy evaluation under an arbitrary reward table.
pub fn evaluate_with_reward(mdp: &TabularMdp, policy: &Policy, reward: &StepTable) -> PolicyEvaluation {
    let shape = mdp.shape();
    let ns = shape.num_states;
    let mut q = StepTable::zeros(shape);
    let mut v = vec![0.0; shape.horizon * ns];
    let mut next_values = vec![0.0; ns];
    for h in (0..shape.horizon).rev() {
        let layer = bellman_backup_with(mdp, reward, &next_values, h);
        for s in 0..ns {
            for a in 0..shape.num_actions {
                q.set(h, s, a, layer[s * shape.num_actions + a]);
            }
            v[h * ns + s] = q.get(h, s, policy.action(h, s));
        }
        next_values = v[h * ns..(h + 1) * ns].to_vec();
    }
    let value = dot(mdp.initial_dist(), &v[..ns]);
    PolicyEvaluation { value, q, v }
}

/// State distribution at every step, row-major `(h, s)`.
pub fn state_distribution(mdp: &TabularMdp, policy: &Policy) -> Vec<f64> {
    let shape = mdp.shape();
    let ns = shape.num_states;
    let mut out = Vec::with_capacity(shape.horizon * ns);
    let mut current = mdp.initial_dist().to_vec();
    for h in 0..shape.horizon {
        out.extend_from_slice(&current);
        if h + 1 == shape.horizon {
            break;
        }
        let mut next = vec![0.0; ns];
        for (s, &p) in current.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = mdp.transition(h, s, policy.action(h, s));
            for (slot, &t) in next.iter_mut().zip(row) {
                *slot += p * t;
            }
        }
        current = next;
    }
    out
}

/// Exact occupancy measure `d^π_h(s, a)`.
pub fn occupancy(mdp: &TabularMdp, policy: &Policy) -> StepTable {
    let shape = mdp.shape();
    let states = state_distribution(mdp, policy);
    let mut d = StepTable::zeros(shape);
    for h in 0..shape.horizon {
        for s in 0..shape.num_states {
            let p = states[h * shape.num_states + s];
            d.set(h, s, policy.action(h, s), p);
        }
    }
    d
}

/// Draws an index from a probability vector by inversion.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_positive = i;
            if u < cumulative {
                return i;
            }
        }
    }
    last_positive
}

/// Samples `τ ∼ P^π`.
pub fn sample_trajectory<R: Rng + ?Sized>(mdp: &TabularMdp, policy: &Policy, rng: &mut R) -> Trajectory {
    let horizon = mdp.horizon();
    let mut steps = Vec::with_capacity(horizon);
    let mut s = sample_index(mdp.initial_dist(), rng);
    for h in 0..horizon {
        let a = policy.action(h, s);
        steps.push((s, a));
        if h + 1 < horizon {
            s = sample_index(mdp.transition(h, s, a), rng);
        }
    }
    Trajectory { steps }
}

/// Samples a trajectory from a fixed initial state.
pub fn sample_trajectory_from<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    initial_state: usize,
    rng: &mut R,
) -> Trajectory {
    let horizon = mdp.horizon();
    let mut steps = Vec::with_capacity(horizon);
    let mut s = initial_state;
    for h in 0..horizon {
        let a = policy.action(h, s);
        steps.push((s, a));
        if h + 1 < horizon {
            s = sample_index(mdp.transition(h, s, a), rng);
        }
    }
    Trajectory { steps }
}

/// Draws the outcome reward for `τ` with `E[r | τ] = R⋆(τ)` (up to clipping
/// for the Gaussian channel).
pub fn sample_outcome_reward<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    trajectory: &Trajectory,
    channel: OutcomeChannel,
    rng: &mut R,
) -> Result<f64> {
    let mean = mdp.trajectory_reward(trajectory);
    if !(-PROBABILITY_TOLERANCE..=1.0 + PROBABILITY_TOLERANCE).contains(&mean) {
        return Err(Error::Unnormalized(mean));
    }
    let mean = mean.clamp(0.0, 1.0);
    Ok(match channel {
        OutcomeChannel::Bernoulli => {
            let u: f64 = rng.random();
            if u < mean {
                1.0
            } else {
                0.0
            }
        }
        OutcomeChannel::ClippedGaussian { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            (mean + sigma * z).clamp(0.0, 1.0)
        }
        OutcomeChannel::Noiseless => mean,
    })
}

/// Per-step process rewards; the default channel reports the mean reward.
pub fn process_rewards(mdp: &TabularMdp, trajectory: &Trajectory) -> Vec<f64> {
    trajectory
        .steps()
        .iter()
        .enumerate()
        .map(|(h, &(s, a))| mdp.mean_reward().get(h, s, a))
        .collect()
}

/// Bradley–Terry–Luce comparison probability
/// `e^{β r⁺} / (e^{β r⁺} + e^{β r⁻})`.
pub fn btl_probability(r_plus: f64, r_minus: f64, beta: f64) -> f64 {
    math::sigmoid(beta * (r_plus - r_minus))
}

/// Samples `y ∼ Bern(C(τ⁺, τ⁻))` under the BTL model with ground truth `R⋆`.
pub fn sample_preference<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    plus: &Trajectory,
    minus: &Trajectory,
    beta: f64,
    rng: &mut R,
) -> bool {
    let p = btl_probability(mdp.trajectory_reward(plus), mdp.trajectory_reward(minus), beta);
    let u: f64 = rng.random();
    u < p
}

/// Every trajectory with positive probability under `π`, with its probability.
/// Exponential in the horizon; meant for small verification instances.
pub fn enumerate_trajectories(mdp: &TabularMdp, policy: &Policy) -> Vec<(Trajectory, f64)> {
    let mut out = Vec::new();
    for (s, &p) in mdp.initial_dist().iter().enumerate() {
        if p > 0.0 {
            let mut prefix = Vec::with_capacity(mdp.horizon());
            extend_paths(mdp, policy, 0, s, p, &mut prefix, &mut out);
        }
    }
    out
}

fn extend_paths(
    mdp: &TabularMdp,
    policy: &Policy,
    h: usize,
    s: usize,
    prob: f64,
    prefix: &mut Vec<(usize, usize)>,
    out: &mut Vec<(Trajectory, f64)>,
) {
    let a = policy.action(h, s);
    prefix.push((s, a));
    if h + 1 == mdp.horizon() {
        out.push((Trajectory { steps: prefix.clone() }, prob));
    } else {
        for (next, &t) in mdp.transition(h, s, a).iter().enumerate() {
            if t > 0.0 {
                extend_paths(mdp, policy, h + 1, next, prob * t, prefix, out);
            }
        }
    }
    prefix.pop();
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_step() -> TabularMdp {
        let shape = Shape::new(2, 2, 2).unwrap();
        let transitions = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let reward = StepTable::from_fn(shape, |h, _, a| match (h, a) {
            (0, _) => 0.2,
            (1, 0) => 0.2,
            _ => 0.19,
        });
        TabularMdp::new(shape, transitions, vec![1.0, 0.0], reward).unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        let shape = Shape::new(1, 1, 2).unwrap();
        let err = TabularMdp::new(shape, vec![0.9], vec![1.0], StepTable::zeros(shape)).unwrap_err();
        assert_eq!(err, Error::TransitionRow { h: 0, s: 0, a: 0 });
        let err = TabularMdp::new(shape, vec![1.0], vec![0.5], StepTable::zeros(shape)).unwrap_err();
        assert_eq!(err, Error::InitialDistribution);
    }

    #[test]
    fn rejects_unnormalized_returns() {
        let shape = Shape::new(1, 1, 2).unwrap();
        let err =
            TabularMdp::new(shape, vec![1.0], vec![1.0], StepTable::constant(shape, 0.6)).unwrap_err();
        assert!(matches!(err, Error::Unnormalized(v) if (v - 1.2).abs() < 1e-12));
    }

    #[test]
    fn unreachable_states_do_not_count_toward_normalization() {
        let shape = Shape::new(2, 1, 2).unwrap();
        // State 1 is never reached; its large rewards are ignored.
        let reward = StepTable::from_fn(shape, |_, s, _| if s == 1 { 0.9 } else { 0.1 });
        let mdp = TabularMdp::new(shape, vec![1.0, 0.0, 1.0, 0.0], vec![1.0, 0.0], reward);
        assert!(mdp.is_ok());
    }

    #[test]
    fn zero_reward_has_zero_q() {
        let mdp = two_step().with_reward(StepTable::zeros(Shape::new(2, 2, 2).unwrap())).unwrap();
        assert!(optimal_q(&mdp).as_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_state_constant_reward_has_unit_value() {
        let shape = Shape::new(1, 1, 4).unwrap();
        let mdp =
            TabularMdp::new(shape, vec![1.0; 3], vec![1.0], StepTable::constant(shape, 0.25)).unwrap();
        let policy = Policy::from(MarkovPolicy::constant(shape, 0).unwrap());
        assert!((policy_value(&mdp, &policy).value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn composed_policy_switches_after_h_steps() {
        let shape = Shape::new(1, 2, 3).unwrap();
        let zero = Policy::from(MarkovPolicy::constant(shape, 0).unwrap());
        let one = Policy::from(MarkovPolicy::constant(shape, 1).unwrap());
        let composed = Policy::compose(one, zero, 2);
        assert_eq!(composed.action(0, 0), 1);
        assert_eq!(composed.action(1, 0), 1);
        assert_eq!(composed.action(2, 0), 0);
    }

    #[test]
    fn occupancy_of_first_layer_is_initial_dist() {
        let mdp = two_step();
        let policy = Policy::from(MarkovPolicy::constant(mdp.shape(), 0).unwrap());
        let d = occupancy(&mdp, &policy);
        assert_eq!(d.get(0, 0, 0), 1.0);
        assert_eq!(d.get(1, 1, 0), 1.0);
        for h in 0..2 {
            assert!((d.layer(h).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_bernoulli_channels() {
        let shape = Shape::new(1, 2, 1).unwrap();
        let reward = StepTable::from_flat(shape, vec![0.0, 1.0]).unwrap();
        let mdp = TabularMdp::new(shape, vec![], vec![1.0], reward).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = Trajectory::new(shape, vec![(0, 0)]).unwrap();
        let one = Trajectory::new(shape, vec![(0, 1)]).unwrap();
        for _ in 0..200 {
            assert_eq!(sample_outcome_reward(&mdp, &zero, OutcomeChannel::Bernoulli, &mut rng).unwrap(), 0.0);
            assert_eq!(sample_outcome_reward(&mdp, &one, OutcomeChannel::Bernoulli, &mut rng).unwrap(), 1.0);
        }
    }

    #[test]
    fn btl_basics() {
        assert_eq!(btl_probability(0.3, 0.3, 2.0), 0.5);
        assert_eq!(btl_probability(0.9, 0.1, 0.0), 0.5);
        // logistic(1) = e / (1 + e)
        let expected = core::f64::consts::E / (1.0 + core::f64::consts::E);
        assert!((btl_probability(1.0, 0.0, 1.0) - expected).abs() < 1e-15);
        assert!((btl_probability(1.0, 0.0, 1.0) - 0.731_058).abs() < 1e-6);
    }

    #[test]
    fn enumeration_probabilities_sum_to_one() {
        let mdp = two_step();
        let policy = Policy::from(greedy(&optimal_q(&mdp)));
        let paths = enumerate_trajectories(&mdp, &policy);
        assert!((paths.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
