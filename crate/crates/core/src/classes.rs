//! Finite function classes over `(h, s, a)` tables.
//!
//! Every class is an ordered list of joint candidates; one member is a full
//! table over all steps. Index order is significant: all argmax/argmin
//! routines break ties by index.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{self, MarkovPolicy, Shape, StepTable, TabularMdp, Trajectory, ValueTable};

fn validate_members(members: &[StepTable], what: &'static str) -> Result<Shape> {
    let first = members.first().ok_or(Error::Empty(what))?;
    let shape = first.shape();
    for (i, m) in members.iter().enumerate() {
        if m.shape() != shape {
            return Err(Error::Shape(format!("{what} member {i} has a different shape")));
        }
        if m.as_flat().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(format!(
                "{what} member {i} has entries outside [0, 1]"
            )));
        }
    }
    Ok(shape)
}

/// Value-function class `F`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QClass {
    members: Vec<ValueTable>,
}

impl QClass {
    pub fn new(members: Vec<ValueTable>) -> Result<Self> {
        validate_members(&members, "value class")?;
        Ok(Self { members })
    }

    /// Cartesian product of per-step candidate layers, step 0 varying slowest.
    pub fn product_of_steps(shape: Shape, per_step: &[Vec<Vec<f64>>]) -> Result<Self> {
        Self::new(cartesian_tables(shape, per_step)?)
    }

    pub fn members(&self) -> &[ValueTable] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn shape(&self) -> Shape {
        self.members[0].shape()
    }

    /// `Π_F`: greedy policies of every member, in member order.
    pub fn greedy_policies(&self) -> Vec<MarkovPolicy> {
        self.members.iter().map(greedy_policy).collect()
    }
}

/// Reward class `R`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardClass {
    members: Vec<StepTable>,
}

impl RewardClass {
    pub fn new(members: Vec<StepTable>) -> Result<Self> {
        validate_members(&members, "reward class")?;
        Ok(Self { members })
    }

    pub fn members(&self) -> &[StepTable] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn shape(&self) -> Shape {
        self.members[0].shape()
    }
}

/// Comparator class `G`.
///
/// It is treated as the product of its per-step projections
/// `G_h = {g_h : g ∈ G}`, so infima over `G` of per-step sums decompose step
/// by step. The distinct layers are cached per step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparatorClass {
    members: Vec<ValueTable>,
    #[cfg_attr(feature = "serde", serde(skip))]
    layers: Vec<Vec<Vec<f64>>>,
}

impl ComparatorClass {
    /// Requires `F_h ⊆ G_h` for every step.
    pub fn new(members: Vec<ValueTable>, value_class: &QClass) -> Result<Self> {
        let class = Self::unchecked(members)?;
        if class.shape() != value_class.shape() {
            return Err(Error::Shape("comparator and value classes differ in shape".into()));
        }
        for (i, f) in value_class.members().iter().enumerate() {
            for h in 0..class.shape().horizon {
                if !class.layers[h].iter().any(|g| g.as_slice() == f.layer(h)) {
                    return Err(Error::InvalidParameter(format!(
                        "value class member {i} at step {h} is missing from the comparator class"
                    )));
                }
            }
        }
        Ok(class)
    }

    /// `G = F`.
    pub fn from_value_class(value_class: &QClass) -> Self {
        Self::unchecked(value_class.members().to_vec()).expect("value classes are validated")
    }

    fn unchecked(members: Vec<ValueTable>) -> Result<Self> {
        let shape = validate_members(&members, "comparator class")?;
        let mut layers: Vec<Vec<Vec<f64>>> = Vec::with_capacity(shape.horizon);
        for h in 0..shape.horizon {
            let mut distinct: Vec<Vec<f64>> = Vec::new();
            for m in &members {
                if !distinct.iter().any(|l| l.as_slice() == m.layer(h)) {
                    distinct.push(m.layer(h).to_vec());
                }
            }
            layers.push(distinct);
        }
        Ok(Self { members, layers })
    }

    pub fn members(&self) -> &[ValueTable] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn shape(&self) -> Shape {
        self.members[0].shape()
    }

    /// Distinct `|S|·|A|` layers of `G_h`, in first-occurrence order.
    pub fn step_layers(&self, h: usize) -> &[Vec<f64>] {
        &self.layers[h]
    }
}

fn cartesian_tables(shape: Shape, per_step: &[Vec<Vec<f64>>]) -> Result<Vec<StepTable>> {
    if per_step.len() != shape.horizon {
        return Err(Error::Shape(format!(
            "need {} step candidate lists, got {}",
            shape.horizon,
            per_step.len()
        )));
    }
    if per_step.iter().any(|c| c.is_empty()) {
        return Err(Error::Empty("per-step candidate list"));
    }
    if per_step.iter().flatten().any(|l| l.len() != shape.layer_len()) {
        return Err(Error::Shape("candidate layer has the wrong length".into()));
    }
    let mut tables = Vec::new();
    let mut choice = alloc::vec![0usize; shape.horizon];
    loop {
        let mut flat = Vec::with_capacity(shape.table_len());
        for (h, &c) in choice.iter().enumerate() {
            flat.extend_from_slice(&per_step[h][c]);
        }
        tables.push(StepTable::from_flat(shape, flat)?);
        // odometer increment, last step fastest
        let mut h = shape.horizon;
        loop {
            if h == 0 {
                return Ok(tables);
            }
            h -= 1;
            choice[h] += 1;
            if choice[h] < per_step[h].len() {
                break;
            }
            choice[h] = 0;
        }
    }
}

/// `π_f`: lowest-index argmax at every `(h, s)`.
pub fn greedy_policy(f: &ValueTable) -> MarkovPolicy {
    mdp::greedy(f)
}

/// Approximation errors `(ε_Q, ε_R)`: the smallest sup-norm distance from a
/// class member to `Q⋆` and to `R⋆`.
pub fn check_realizability(mdp: &TabularMdp, values: &QClass, rewards: &RewardClass) -> (f64, f64) {
    let q_star = mdp::optimal_q(mdp);
    let eps_q = values.members().iter().map(|f| f.sup_distance(&q_star)).fold(f64::INFINITY, f64::min);
    let eps_r = rewards
        .members()
        .iter()
        .map(|r| r.sup_distance(mdp.mean_reward()))
        .fold(f64::INFINITY, f64::min);
    (eps_q, eps_r)
}

/// Completeness error: `max_{f, R, h} min_{g ∈ G} ‖T_{R,h} f_{h+1} − g_h‖_∞`.
pub fn check_completeness(
    mdp: &TabularMdp,
    values: &QClass,
    rewards: &RewardClass,
    comparators: &ComparatorClass,
) -> f64 {
    let horizon = mdp.horizon();
    let mut worst: f64 = 0.0;
    for f in values.members() {
        for r in rewards.members() {
            for h in 0..horizon {
                let target = mdp::bellman_backup(mdp, r, f, h);
                let best = comparators
                    .step_layers(h)
                    .iter()
                    .map(|g| {
                        g.iter().zip(&target).map(|(x, y)| libm::fabs(x - y)).fold(0.0, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(best);
            }
        }
    }
    worst
}

/// `R^f(τ) = Σ_h [f_h(s_h, a_h) − max_a f_{h+1}(s_{h+1}, a)]` with `f_{H+1} ≡ 0`.
pub fn induced_reward_model(f: &ValueTable, trajectory: &Trajectory) -> f64 {
    let steps = trajectory.steps();
    steps
        .iter()
        .enumerate()
        .map(|(h, &(s, a))| {
            let next = match steps.get(h + 1) {
                Some(&(s_next, _)) => f.state_max(h + 1, s_next),
                None => 0.0,
            };
            f.get(h, s, a) - next
        })
        .sum()
}

/// Uniform random tables in `[0, 1]`.
pub fn random_tables<R: Rng + ?Sized>(shape: Shape, count: usize, rng: &mut R) -> Vec<StepTable> {
    (0..count).map(|_| StepTable::from_fn(shape, |_, _, _| rng.random::<f64>())).collect()
}

/// `base` plus `count - 1` perturbations with entries shifted by
/// `U[-scale, scale]` and clipped to `[0, 1]`. The exact table sits at a
/// random position.
pub fn perturbed_tables<R: Rng + ?Sized>(
    base: &StepTable,
    count: usize,
    scale: f64,
    rng: &mut R,
) -> Vec<StepTable> {
    if count == 0 {
        return Vec::new();
    }
    let mut tables: Vec<StepTable> = (1..count)
        .map(|_| {
            StepTable::from_fn(base.shape(), |h, s, a| {
                let noise = (2.0 * rng.random::<f64>() - 1.0) * scale;
                (base.get(h, s, a) + noise).clamp(0.0, 1.0)
            })
        })
        .collect();
    let position = rng.random_range(0..count);
    tables.insert(position, base.clone());
    tables
}

/// `{Q⋆} ∪ {Q⋆ + noise}`.
pub fn perturbed_optimal_class<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    count: usize,
    scale: f64,
    rng: &mut R,
) -> Result<QClass> {
    QClass::new(perturbed_tables(&mdp::optimal_q(mdp), count, scale, rng))
}

/// `{R⋆} ∪ {R⋆ + noise}`.
pub fn perturbed_reward_class<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    count: usize,
    scale: f64,
    rng: &mut R,
) -> Result<RewardClass> {
    RewardClass::new(perturbed_tables(mdp.mean_reward(), count, scale, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn shape() -> Shape {
        Shape::new(2, 3, 2).unwrap()
    }

    #[test]
    fn greedy_prefers_lowest_index_on_ties() {
        let f = StepTable::constant(shape(), 0.4);
        assert!(greedy_policy(&f).actions().iter().all(|&a| a == 0));
        let g = StepTable::from_fn(shape(), |h, s, a| if a == (h + s) % 3 { 0.9 } else { 0.1 });
        let pi = greedy_policy(&g);
        for h in 0..2 {
            for s in 0..2 {
                assert_eq!(pi.action(h, s), (h + s) % 3);
            }
        }
    }

    #[test]
    fn induced_reward_of_constant_table_is_the_constant() {
        let f = StepTable::constant(shape(), 0.3);
        let tau = Trajectory::new(shape(), vec![(1, 2), (0, 1)]).unwrap();
        assert!((induced_reward_model(&f, &tau) - 0.3).abs() < 1e-15);
        assert_eq!(induced_reward_model(&StepTable::zeros(shape()), &tau), 0.0);
    }

    #[test]
    fn product_enumerates_every_combination() {
        let layers = vec![
            vec![vec![0.1; 6], vec![0.2; 6]],
            vec![vec![0.3; 6], vec![0.4; 6], vec![0.5; 6]],
        ];
        let class = QClass::product_of_steps(shape(), &layers).unwrap();
        assert_eq!(class.len(), 6);
        assert_eq!(class.members()[0].get(0, 0, 0), 0.1);
        assert_eq!(class.members()[0].get(1, 0, 0), 0.3);
        assert_eq!(class.members()[5].get(0, 0, 0), 0.2);
        assert_eq!(class.members()[5].get(1, 0, 0), 0.5);
    }

    #[test]
    fn comparator_must_contain_value_layers() {
        let f = QClass::new(vec![StepTable::constant(shape(), 0.5)]).unwrap();
        let err = ComparatorClass::new(vec![StepTable::constant(shape(), 0.4)], &f).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        assert!(ComparatorClass::new(vec![StepTable::constant(shape(), 0.5)], &f).is_ok());
    }

    #[test]
    fn empty_and_out_of_range_classes_are_rejected() {
        assert_eq!(QClass::new(vec![]).unwrap_err(), Error::Empty("value class"));
        assert!(RewardClass::new(vec![StepTable::constant(shape(), 1.5)]).is_err());
    }
}
