//! Empirical losses over feedback datasets.
//!
//! The free functions evaluate each loss sample by sample, exactly as written.
//! [`TrajectoryTally`] and [`PreferenceTally`] hold sufficient statistics per
//! distinct trajectory so the learners can re-evaluate losses for every class
//! member at every iteration without rescanning the raw samples.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::classes::{induced_reward_model, ComparatorClass};
use crate::error::{Error, Result};
use crate::math;
use crate::mdp::{FeedbackKind, FeedbackSample, StepTable, Trajectory};

/// Append-only list of samples of a single feedback kind.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    kind: FeedbackKind,
    samples: Vec<FeedbackSample>,
}

impl Dataset {
    pub fn new(kind: FeedbackKind) -> Self {
        Self { kind, samples: Vec::new() }
    }

    pub fn kind(&self) -> FeedbackKind {
        self.kind
    }

    pub fn samples(&self) -> &[FeedbackSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: FeedbackSample) -> Result<()> {
        if sample.kind() != self.kind {
            return Err(Error::KindMismatch { expected: self.kind, found: sample.kind() });
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Concatenation of two datasets of the same kind.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        self.expect(other.kind)?;
        self.samples.extend_from_slice(&other.samples);
        Ok(())
    }

    fn expect(&self, kind: FeedbackKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch { expected: kind, found: self.kind })
        }
    }

    /// Every trajectory in the dataset; preference samples contribute both.
    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.samples.iter().flat_map(|sample| {
            let (first, second) = match sample {
                FeedbackSample::Process { trajectory, .. }
                | FeedbackSample::Outcome { trajectory, .. } => (trajectory, None),
                FeedbackSample::Preference { plus, minus, .. } => (plus, Some(minus)),
            };
            core::iter::once(first).chain(second)
        })
    }
}

/// Where the per-step reward inside a Bellman target comes from.
#[derive(Debug, Clone, Copy)]
pub enum RewardSource<'a> {
    /// A proxy reward table `R_h(s_h, a_h)`.
    Table(&'a StepTable),
    /// The per-step labels stored with process samples.
    Observed,
}

/// `Σ_{(τ,r)} (Σ_h R_h(s_h, a_h) − r)²`.
pub fn loss_rm(reward: &StepTable, data: &Dataset) -> Result<f64> {
    data.expect(FeedbackKind::Outcome)?;
    Ok(data
        .samples
        .iter()
        .map(|sample| match sample {
            FeedbackSample::Outcome { trajectory, reward: r } => {
                let e = reward.trajectory_sum(trajectory) - r;
                e * e
            }
            _ => unreachable!("kind checked"),
        })
        .sum())
}

/// Step-`h` Bellman error
/// `Σ_τ (current_h(s_h,a_h) − r_h − max_{a'} next_{h+1}(s_{h+1}, a'))²`.
///
/// `current` supplies the step-`h` layer and `next` the step-`h+1` layer; past
/// the horizon the next value is zero. With [`RewardSource::Table`] only the
/// trajectories are read, so any dataset kind is accepted. With
/// [`RewardSource::Observed`] the dataset must hold process samples.
pub fn loss_be_step(
    current: &StepTable,
    next: &StepTable,
    reward: RewardSource<'_>,
    h: usize,
    data: &Dataset,
) -> Result<f64> {
    match reward {
        RewardSource::Table(table) => Ok(data
            .trajectories()
            .map(|tau| {
                let e = step_residual(current, next, h, tau) - step_reward(table, h, tau);
                e * e
            })
            .sum()),
        RewardSource::Observed => {
            data.expect(FeedbackKind::Process)?;
            Ok(data
                .samples
                .iter()
                .map(|sample| match sample {
                    FeedbackSample::Process { trajectory, rewards } => {
                        let e = step_residual(current, next, h, trajectory) - rewards[h];
                        e * e
                    }
                    _ => unreachable!("kind checked"),
                })
                .sum())
        }
    }
}

fn step_reward(table: &StepTable, h: usize, tau: &Trajectory) -> f64 {
    let (s, a) = tau.steps()[h];
    table.get(h, s, a)
}

/// `current_h(s_h, a_h) − max_{a'} next_{h+1}(s_{h+1}, a')`.
fn step_residual(current: &StepTable, next: &StepTable, h: usize, tau: &Trajectory) -> f64 {
    let (s, a) = tau.steps()[h];
    let future = tau.state(h + 1).map_or(0.0, |s_next| next.state_max(h + 1, s_next));
    current.get(h, s, a) - future
}

/// Comparator-subtracted Bellman loss
/// `Σ_h L_h(f_h, f_{h+1}) − inf_{g ∈ G} Σ_h L_h(g_h, f_{h+1})`.
///
/// `G` is the product of its per-step projections, so the infimum is taken
/// step by step.
pub fn loss_be(
    f: &StepTable,
    reward: RewardSource<'_>,
    comparators: &ComparatorClass,
    data: &Dataset,
) -> Result<f64> {
    let horizon = f.shape().horizon;
    let mut total = 0.0;
    for h in 0..horizon {
        let own = loss_be_step(f, f, reward, h, data)?;
        let mut best = f64::INFINITY;
        for layer in comparators.step_layers(h) {
            let g = layer_as_table(f, h, layer);
            best = best.min(loss_be_step(&g, f, reward, h, data)?);
        }
        total += own - best;
    }
    Ok(total)
}

fn layer_as_table(template: &StepTable, h: usize, layer: &[f64]) -> StepTable {
    let shape = template.shape();
    let mut g = StepTable::zeros(shape);
    for s in 0..shape.num_states {
        for a in 0..shape.num_actions {
            g.set(h, s, a, layer[s * shape.num_actions + a]);
        }
    }
    g
}

/// Bellman residual loss `Σ_{(τ,r)} (R^f(τ) − r)²` for deterministic dynamics.
pub fn loss_dbe(f: &StepTable, data: &Dataset) -> Result<f64> {
    data.expect(FeedbackKind::Outcome)?;
    Ok(data
        .samples
        .iter()
        .map(|sample| match sample {
            FeedbackSample::Outcome { trajectory, reward } => {
                let e = induced_reward_model(f, trajectory) - reward;
                e * e
            }
            _ => unreachable!("kind checked"),
        })
        .sum())
}

/// `L(w, y) = −β w y + log(1 + e^{β w})`.
pub fn logistic_loss(w: f64, preferred: bool, beta: f64) -> f64 {
    let x = beta * w;
    let y = if preferred { 1.0 } else { 0.0 };
    math::log1p_exp(x) - x * y
}

/// `∂L/∂w = β (σ(β w) − y)`.
pub fn logistic_loss_derivative(w: f64, preferred: bool, beta: f64) -> f64 {
    let y = if preferred { 1.0 } else { 0.0 };
    beta * (math::sigmoid(beta * w) - y)
}

/// `Σ_{(τ⁺,τ⁻,y)} L(R(τ⁺) − R(τ⁻), y)`.
pub fn loss_pbrm(reward: &StepTable, data: &Dataset, beta: f64) -> Result<f64> {
    data.expect(FeedbackKind::Preference)?;
    Ok(data
        .samples
        .iter()
        .map(|sample| match sample {
            FeedbackSample::Preference { plus, minus, preferred } => logistic_loss(
                reward.trajectory_sum(plus) - reward.trajectory_sum(minus),
                *preferred,
                beta,
            ),
            _ => unreachable!("kind checked"),
        })
        .sum())
}

/// Estimated reference value: the mean of `R(τ⁻)` over the dataset.
pub fn v_ref_hat(reward: &StepTable, data: &Dataset) -> Result<f64> {
    data.expect(FeedbackKind::Preference)?;
    if data.is_empty() {
        return Err(Error::Empty("preference dataset"));
    }
    let total: f64 = data
        .samples
        .iter()
        .map(|sample| match sample {
            FeedbackSample::Preference { minus, .. } => reward.trajectory_sum(minus),
            _ => unreachable!("kind checked"),
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// Sufficient statistics of a trajectory group.
#[derive(Debug, Clone, PartialEq)]
struct TrajectoryStats {
    count: f64,
    outcome_sum: f64,
    outcome_sq: f64,
    step_sum: Vec<f64>,
    step_sq: Vec<f64>,
}

impl TrajectoryStats {
    fn new(horizon: usize) -> Self {
        Self {
            count: 0.0,
            outcome_sum: 0.0,
            outcome_sq: 0.0,
            step_sum: vec![0.0; horizon],
            step_sq: vec![0.0; horizon],
        }
    }
}

/// Per-trajectory counts and label moments.
///
/// Losses evaluated through the tally agree with the sample-by-sample
/// functions up to summation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryTally {
    groups: BTreeMap<Trajectory, TrajectoryStats>,
    samples: usize,
}

impl TrajectoryTally {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the tally of a dataset of any kind.
    pub fn from_dataset(data: &Dataset) -> Self {
        let mut tally = Self::new();
        for sample in data.samples() {
            match sample {
                FeedbackSample::Outcome { trajectory, reward } => tally.add_outcome(trajectory, *reward),
                FeedbackSample::Process { trajectory, rewards } => tally.add_process(trajectory, rewards),
                FeedbackSample::Preference { plus, minus, .. } => {
                    tally.add_trajectory(plus);
                    tally.add_trajectory(minus);
                }
            }
        }
        tally
    }

    fn entry(&mut self, trajectory: &Trajectory) -> &mut TrajectoryStats {
        self.samples += 1;
        self.groups
            .entry(trajectory.clone())
            .or_insert_with(|| TrajectoryStats::new(trajectory.len()))
    }

    /// Records a trajectory with no label.
    pub fn add_trajectory(&mut self, trajectory: &Trajectory) {
        self.entry(trajectory).count += 1.0;
    }

    pub fn add_outcome(&mut self, trajectory: &Trajectory, reward: f64) {
        let e = self.entry(trajectory);
        e.count += 1.0;
        e.outcome_sum += reward;
        e.outcome_sq += reward * reward;
    }

    pub fn add_process(&mut self, trajectory: &Trajectory, rewards: &[f64]) {
        let e = self.entry(trajectory);
        e.count += 1.0;
        for (h, &r) in rewards.iter().enumerate() {
            e.step_sum[h] += r;
            e.step_sq[h] += r * r;
        }
    }

    /// Number of recorded samples.
    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    /// Number of distinct trajectories.
    pub fn distinct(&self) -> usize {
        self.groups.len()
    }

    /// `Σ (x(τ) − r)²` over outcome labels for a per-trajectory prediction.
    pub fn outcome_square_loss(&self, predict: impl Fn(&Trajectory) -> f64) -> f64 {
        self.groups
            .iter()
            .map(|(tau, e)| {
                let x = predict(tau);
                e.count * x * x - 2.0 * x * e.outcome_sum + e.outcome_sq
            })
            .sum()
    }

    pub fn loss_rm(&self, reward: &StepTable) -> f64 {
        self.outcome_square_loss(|tau| reward.trajectory_sum(tau))
    }

    pub fn loss_dbe(&self, f: &StepTable) -> f64 {
        self.outcome_square_loss(|tau| induced_reward_model(f, tau))
    }

    /// Step-`h` Bellman error of a candidate layer `current` (flat
    /// `|S|·|A|`) against targets built from `next`.
    pub fn bellman_step_loss(
        &self,
        current: &[f64],
        next: &StepTable,
        reward: RewardSource<'_>,
        h: usize,
    ) -> f64 {
        let na = next.shape().num_actions;
        self.groups
            .iter()
            .map(|(tau, e)| {
                let (s, a) = tau.steps()[h];
                let future = tau.state(h + 1).map_or(0.0, |s2| next.state_max(h + 1, s2));
                let x = current[s * na + a] - future;
                match reward {
                    RewardSource::Table(table) => {
                        let d = x - table.get(h, s, a);
                        e.count * d * d
                    }
                    RewardSource::Observed => {
                        e.count * x * x - 2.0 * x * e.step_sum[h] + e.step_sq[h]
                    }
                }
            })
            .sum()
    }

    /// Comparator-subtracted Bellman loss, see [`loss_be`].
    pub fn loss_be(&self, f: &StepTable, reward: RewardSource<'_>, comparators: &ComparatorClass) -> f64 {
        let horizon = f.shape().horizon;
        (0..horizon)
            .map(|h| {
                let own = self.bellman_step_loss(f.layer(h), f, reward, h);
                let best = comparators
                    .step_layers(h)
                    .iter()
                    .map(|g| self.bellman_step_loss(g, f, reward, h))
                    .fold(f64::INFINITY, f64::min);
                own - best
            })
            .sum()
    }
}

/// Counts of `(τ⁺, τ⁻)` pairs by label plus a tally of every trajectory seen.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceTally {
    pairs: BTreeMap<(Trajectory, Trajectory), (f64, f64)>,
    minus: BTreeMap<Trajectory, f64>,
    trajectories: TrajectoryTally,
    samples: usize,
}

impl PreferenceTally {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        data.expect(FeedbackKind::Preference)?;
        let mut tally = Self::new();
        for sample in data.samples() {
            if let FeedbackSample::Preference { plus, minus, preferred } = sample {
                tally.add(plus, minus, *preferred);
            }
        }
        Ok(tally)
    }

    pub fn add(&mut self, plus: &Trajectory, minus: &Trajectory, preferred: bool) {
        let slot = self.pairs.entry((plus.clone(), minus.clone())).or_insert((0.0, 0.0));
        if preferred {
            slot.0 += 1.0;
        } else {
            slot.1 += 1.0;
        }
        *self.minus.entry(minus.clone()).or_insert(0.0) += 1.0;
        self.trajectories.add_trajectory(plus);
        self.trajectories.add_trajectory(minus);
        self.samples += 1;
    }

    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    /// Both trajectories of every pair.
    pub fn trajectories(&self) -> &TrajectoryTally {
        &self.trajectories
    }

    pub fn loss_pbrm(&self, reward: &StepTable, beta: f64) -> f64 {
        self.pairs
            .iter()
            .map(|((plus, minus), &(wins, losses))| {
                let w = reward.trajectory_sum(plus) - reward.trajectory_sum(minus);
                wins * logistic_loss(w, true, beta) + losses * logistic_loss(w, false, beta)
            })
            .sum()
    }

    /// Mean of `R(τ⁻)`; zero for an empty tally.
    pub fn v_ref_hat(&self, reward: &StepTable) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        let total: f64 = self.minus.iter().map(|(tau, &n)| n * reward.trajectory_sum(tau)).sum();
        total / self.samples as f64
    }
}
