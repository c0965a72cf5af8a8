//! Named instances and random generators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::classes::{ComparatorClass, QClass, RewardClass};
use crate::error::{Error, Result};
use crate::mdp::{self, MarkovPolicy, Policy, Shape, StepTable, TabularMdp};

/// The two-layer instance on which fitting the reward first and then running
/// optimism never visits `(s₂, a₁)`.
///
/// States: `0 = s₁`, `1 = s₂`. Actions: `0 = a₁`, `1 = a₂`. Every table is
/// state-independent within a step, so the unreachable cells carry the same
/// values as the reachable ones and `Q¹` equals `Q⋆` everywhere.
#[derive(Debug, Clone)]
pub struct HardCaseBundle {
    /// Ground truth reward `R¹`.
    pub mdp: TabularMdp,
    /// `{Q¹, Q², Q³, Q⁴}`.
    pub q_class: QClass,
    /// `{R¹, R²}`.
    pub r_class: RewardClass,
    /// Same members as `q_class`.
    pub g_class: ComparatorClass,
}

pub const HARD_CASE_S1: usize = 0;
pub const HARD_CASE_S2: usize = 1;
pub const HARD_CASE_A1: usize = 0;
pub const HARD_CASE_A2: usize = 1;

fn two_layer_table(shape: Shape, first: f64, second: [f64; 2]) -> StepTable {
    StepTable::from_fn(shape, |h, _, a| if h == 0 { first } else { second[a] })
}

pub fn build_hard_case() -> HardCaseBundle {
    let shape = Shape { num_states: 2, num_actions: 2, horizon: 2 };
    let r1 = two_layer_table(shape, 0.20, [0.20, 0.19]);
    let r2 = two_layer_table(shape, 0.00, [0.38, 0.39]);
    let q = [
        two_layer_table(shape, 0.40, [0.20, 0.19]),
        two_layer_table(shape, 0.20, [0.20, 0.19]),
        two_layer_table(shape, 0.59, [0.38, 0.39]),
        two_layer_table(shape, 0.39, [0.38, 0.39]),
    ];
    // every (s, a) at step 1 moves to s₂
    let transitions = vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
    let mdp = TabularMdp::new(shape, transitions, vec![1.0, 0.0], r1.clone())
        .expect("hard case is a valid MDP");
    let q_class = QClass::new(q.to_vec()).expect("valid class");
    let r_class = RewardClass::new(vec![r1, r2]).expect("valid class");
    let g_class = ComparatorClass::from_value_class(&q_class);
    HardCaseBundle { mdp, q_class, r_class, g_class }
}

/// Greedy packing of unit vectors with pairwise inner products at most
/// `1 − ε`. Gives up after `failure_budget` rejected candidates.
pub fn sphere_packing<R: Rng + ?Sized>(
    dimension: usize,
    epsilon: f64,
    max_n: usize,
    failure_budget: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if dimension == 0 {
        return Err(Error::InvalidParameter("packing dimension must be positive".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let bound = 1.0 - epsilon;
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut failures = 0;
    while accepted.len() < max_n && failures < failure_budget {
        let mut v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(rng)).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        if accepted.iter().all(|u| dot(u, &v) <= bound) {
            accepted.push(v);
        } else {
            failures += 1;
        }
    }
    Ok(accepted)
}

/// Default number of rejected candidates before packing stops.
pub const DEFAULT_PACKING_FAILURES: usize = 10_000;

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Two-step family `{M^v : v ∈ Θ}` where the first action `θ` moves to state
/// `θ`, the first-step reward hides a hinge in `⟨a, v⟩` and the second-step
/// reward cancels the linear part.
///
/// State `0` is the start state; state `i + 1` and action `i` both stand for
/// `θ_i`.
#[derive(Debug, Clone)]
pub struct ReluFamily {
    theta: Vec<Vec<f64>>,
    epsilon: f64,
    hidden: usize,
    mdp: TabularMdp,
}

impl ReluFamily {
    pub fn dimension(&self) -> usize {
        self.theta[0].len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `b = 1 − ε`.
    pub fn bias(&self) -> f64 {
        1.0 - self.epsilon
    }

    pub fn theta_set(&self) -> &[Vec<f64>] {
        &self.theta
    }

    pub fn num_arms(&self) -> usize {
        self.theta.len()
    }

    pub fn hidden_index(&self) -> usize {
        self.hidden
    }

    /// `M^v` for the hidden `v`.
    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    /// Reward table of `M^u` for hypothesis index `u`.
    pub fn reward_for(&self, hypothesis: usize) -> StepTable {
        relu_reward(&self.theta, self.epsilon, hypothesis)
    }

    /// `Q⋆` of `M^u` for every `u`, in index order.
    pub fn hypothesis_q_class(&self) -> QClass {
        let members = (0..self.num_arms())
            .map(|u| mdp::optimal_q_for_reward(&self.mdp, &self.reward_for(u)))
            .collect();
        QClass::new(members).expect("hypothesis values lie in [0, 1]")
    }

    pub fn hypothesis_reward_class(&self) -> RewardClass {
        RewardClass::new((0..self.num_arms()).map(|u| self.reward_for(u)).collect())
            .expect("rewards lie in [0, 1]")
    }

    /// `π^θ`: play `θ_arm` at both steps.
    pub fn arm_policy(&self, arm: usize) -> Policy {
        Policy::from(MarkovPolicy::constant(self.mdp.shape(), arm).expect("arm in range"))
    }

    /// `J(π) = 2/3 + (ε/3)·1{a_π = v}` for a policy whose first action is `arm`.
    pub fn value_of_first_action(&self, arm: usize) -> f64 {
        2.0 / 3.0 + if arm == self.hidden { self.epsilon / 3.0 } else { 0.0 }
    }
}

fn relu_reward(theta: &[Vec<f64>], epsilon: f64, v: usize) -> StepTable {
    let n = theta.len();
    let shape = Shape { num_states: n + 1, num_actions: n, horizon: 2 };
    let b = 1.0 - epsilon;
    let hidden = &theta[v];
    StepTable::from_fn(shape, |h, s, a| {
        if h == 0 {
            let x = dot(&theta[a], hidden);
            (relu(x - b) + x + 1.0) / 3.0
        } else if s == 0 {
            // the start state is never occupied at the second step
            1.0 / 3.0
        } else {
            // ⟨v, v⟩ may round above 1
            ((1.0 - dot(&theta[s - 1], hidden)) / 3.0).max(0.0)
        }
    })
}

pub fn build_relu_family(theta: Vec<Vec<f64>>, epsilon: f64, hidden_index: usize) -> Result<ReluFamily> {
    if theta.is_empty() {
        return Err(Error::Empty("theta set"));
    }
    if hidden_index >= theta.len() {
        return Err(Error::InvalidParameter(format!("hidden index {hidden_index} out of range")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let d = theta[0].len();
    for (i, t) in theta.iter().enumerate() {
        if t.len() != d || libm::fabs(dot(t, t) - 1.0) > 1e-12 {
            return Err(Error::InvalidParameter(format!("theta {i} is not a unit vector in R^{d}")));
        }
        for u in &theta[..i] {
            if dot(t, u) > 1.0 - epsilon + 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "theta {i} violates the packing bound"
                )));
            }
        }
    }
    let n = theta.len();
    let shape = Shape { num_states: n + 1, num_actions: n, horizon: 2 };
    let mut transitions = Vec::with_capacity(shape.layer_len() * shape.num_states);
    for _s in 0..shape.num_states {
        for a in 0..n {
            let mut row = vec![0.0; shape.num_states];
            row[a + 1] = 1.0;
            transitions.extend(row);
        }
    }
    let mut initial = vec![0.0; shape.num_states];
    initial[0] = 1.0;
    let reward = relu_reward(&theta, epsilon, hidden_index);
    let mdp = TabularMdp::new(shape, transitions, initial, reward)?;
    Ok(ReluFamily { theta, epsilon, hidden: hidden_index, mdp })
}

/// Parameters of a random tabular MDP.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomTabularSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    /// Multiplies the normalised rewards; in `[0, 1]`.
    pub reward_scale: f64,
    pub seed: u64,
}

fn dirichlet_ones<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Uniform rewards divided by `H · max entry`, so every trajectory's total
/// lies in `[0, reward_scale]`.
fn normalized_rewards<R: Rng + ?Sized>(shape: Shape, reward_scale: f64, rng: &mut R) -> StepTable {
    let raw = StepTable::from_fn(shape, |_, _, _| rng.random::<f64>());
    let max = raw.as_flat().iter().copied().fold(0.0, f64::max);
    if reward_scale == 0.0 || max == 0.0 {
        return StepTable::zeros(shape);
    }
    let factor = reward_scale / (shape.horizon as f64 * max);
    raw.map(|v| v * factor)
}

/// Dirichlet(1) transitions and initial distribution, normalised uniform rewards.
pub fn build_random_tabular(spec: RandomTabularSpec) -> Result<TabularMdp> {
    if !(0.0..=1.0).contains(&spec.reward_scale) {
        return Err(Error::InvalidParameter(format!(
            "reward_scale must lie in [0, 1], got {}",
            spec.reward_scale
        )));
    }
    let shape = Shape::new(spec.num_states, spec.num_actions, spec.horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows = shape.horizon.saturating_sub(1) * shape.layer_len();
    let mut transitions = Vec::with_capacity(rows * shape.num_states);
    for _ in 0..rows {
        transitions.extend(dirichlet_ones(shape.num_states, &mut rng));
    }
    let initial = dirichlet_ones(shape.num_states, &mut rng);
    let reward = normalized_rewards(shape, spec.reward_scale, &mut rng);
    TabularMdp::new(shape, transitions, initial, reward)
}

/// Deterministic layered MDP with `length` states and horizon `length`.
///
/// Each `(h, s, a)` moves to a uniformly drawn next state; the start state is
/// uniform over all states.
pub fn build_deterministic_chain(length: usize, num_actions: usize, seed: u64) -> Result<TabularMdp> {
    if length < 2 {
        return Err(Error::InvalidParameter(format!("chain length must be at least 2, got {length}")));
    }
    let shape = Shape::new(length, num_actions, length)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (shape.horizon - 1) * shape.layer_len();
    let mut transitions = Vec::with_capacity(rows * length);
    for _ in 0..rows {
        let mut row = vec![0.0; length];
        row[rng.random_range(0..length)] = 1.0;
        transitions.extend(row);
    }
    let initial = vec![1.0 / length as f64; length];
    let reward = normalized_rewards(shape, 1.0, &mut rng);
    TabularMdp::new(shape, transitions, initial, reward)
}
