//! Experiment configuration and its validation.

use std::path::PathBuf;

use outcome_rl_core::algorithms::AlgoConfig;
use outcome_rl_core::classes::{self, ComparatorClass, QClass, RewardClass};
use outcome_rl_core::env::{self, RandomTabularSpec, DEFAULT_PACKING_FAILURES};
use outcome_rl_core::mdp::{optimal_q, MarkovPolicy};
use outcome_rl_core::{OutcomeChannel, TabularMdp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::io::{self, ClassesFile, MdpFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub classes: ClassSpec,
    pub algorithm: AlgorithmSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

/// Named environment builder, `{"name": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    HardCase,
    Relu {
        dimension: usize,
        epsilon: f64,
        max_arms: usize,
        #[serde(default)]
        packing_seed: u64,
        #[serde(default)]
        hidden: usize,
    },
    RandomTabular {
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        #[serde(default = "one")]
        reward_scale: f64,
        #[serde(default)]
        seed: u64,
        /// Pins the start state; otherwise it is drawn from a random `ρ`.
        #[serde(default)]
        initial_state: Option<usize>,
    },
    DeterministicChain {
        length: usize,
        num_actions: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        initial_state: Option<usize>,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

/// Named class generator, `{"generator": ..., "params": {...}}`.
///
/// The comparator class is always built from the value class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassSpec {
    HardCase,
    /// `F = {Q⋆}`, `R = {R⋆}`.
    SingletonOptimal,
    /// `Q⋆` and `R⋆` hidden among `size − 1` clipped perturbations each.
    PerturbedOptimal {
        size: usize,
        scale: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Uniform random tables; usually not realizable.
    Random {
        size: usize,
        #[serde(default)]
        seed: u64,
    },
    ReluHypotheses,
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    Algorithm1,
    Algorithm2,
    Algorithm3,
    FittedBaseline,
    ProcessBaseline,
}

impl AlgorithmName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Algorithm1 => "algorithm1",
            Self::Algorithm2 => "algorithm2",
            Self::Algorithm3 => "algorithm3",
            Self::FittedBaseline => "fitted_baseline",
            Self::ProcessBaseline => "process_baseline",
        }
    }

    fn needs_reward_class(self) -> bool {
        matches!(self, Self::Algorithm1 | Self::Algorithm3 | Self::FittedBaseline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: AlgorithmName,
    pub lambda: f64,
    pub iterations: usize,
    #[serde(default)]
    pub beta_btl: Option<f64>,
    /// Missing means an unbounded confidence set.
    #[serde(default)]
    pub beta_conf: Option<f64>,
    /// `π_ref` plays this action everywhere.
    #[serde(default)]
    pub ref_action: usize,
    #[serde(default)]
    pub channel: OutcomeChannel,
}

/// Environment, classes and learner settings ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mdp: TabularMdp,
    pub values: QClass,
    pub rewards: Option<RewardClass>,
    pub comparators: ComparatorClass,
    pub algorithm: AlgorithmName,
    /// Learner settings; the seed is filled in per run.
    pub template: AlgoConfig,
}

enum BuiltEnv {
    Plain(TabularMdp),
    HardCase(env::HardCaseBundle),
    Relu(env::ReluFamily),
}

impl BuiltEnv {
    fn mdp(&self) -> &TabularMdp {
        match self {
            Self::Plain(m) => m,
            Self::HardCase(b) => &b.mdp,
            Self::Relu(f) => f.mdp(),
        }
    }
}

fn invalid(path: &str) -> impl Fn(outcome_rl_core::Error) -> HarnessError + '_ {
    move |e| HarnessError::validation(path, e.to_string())
}

impl ExperimentConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        io::read_json(path)
    }

    /// Builds everything a run needs; every failure is a validation error.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.seeds.is_empty() {
            return Err(HarnessError::validation("seeds", "at least one seed is required"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(HarnessError::validation("output_dir", "must not be empty"));
        }
        let alg = &self.algorithm;
        let built = self.build_environment()?;
        let mdp = built.mdp().clone();
        let (values, rewards) = self.build_classes(&built)?;
        if values.shape() != mdp.shape() {
            return Err(HarnessError::validation("classes", "class shape does not match the environment"));
        }
        if let Some(r) = &rewards {
            if r.shape() != mdp.shape() {
                return Err(HarnessError::validation("classes", "reward class shape does not match the environment"));
            }
        }
        if alg.name.needs_reward_class() && rewards.is_none() {
            return Err(HarnessError::validation(
                "classes",
                format!("{} needs a reward class", alg.name.as_str()),
            ));
        }
        match alg.name {
            AlgorithmName::Algorithm2 => {
                if !mdp.is_deterministic() {
                    return Err(HarnessError::validation(
                        "algorithm.name",
                        "algorithm2 requires deterministic transitions",
                    ));
                }
            }
            _ => {
                if mdp.fixed_initial_state().is_none() {
                    return Err(HarnessError::validation(
                        "algorithm.name",
                        format!("{} requires a fixed initial state", alg.name.as_str()),
                    ));
                }
            }
        }
        if alg.ref_action >= mdp.num_actions() {
            return Err(HarnessError::validation("algorithm.ref_action", "action out of range"));
        }
        if !(alg.lambda >= 0.0 && alg.lambda.is_finite()) {
            return Err(HarnessError::validation("algorithm.lambda", "must be finite and nonnegative"));
        }
        if alg.iterations == 0 {
            return Err(HarnessError::validation("algorithm.iterations", "must be at least 1"));
        }
        if let Some(b) = alg.beta_btl {
            if !(b > 0.0 && b.is_finite()) {
                return Err(HarnessError::validation("algorithm.beta_btl", "must be finite and positive"));
            }
        }
        if let Some(b) = alg.beta_conf {
            if b.is_nan() || b < 0.0 {
                return Err(HarnessError::validation("algorithm.beta_conf", "must be nonnegative"));
            }
        }
        if let OutcomeChannel::ClippedGaussian { sigma } = alg.channel {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(HarnessError::validation("algorithm.channel.sigma", "must be finite and nonnegative"));
            }
        }
        let beta_btl = match (alg.name, alg.beta_btl) {
            (AlgorithmName::Algorithm3, None) => {
                return Err(HarnessError::validation("algorithm.beta_btl", "required by algorithm3"))
            }
            (_, Some(b)) => b,
            (_, None) => 1.0,
        };
        let template = AlgoConfig {
            lambda: alg.lambda,
            iterations: alg.iterations,
            beta_btl,
            beta_conf: alg.beta_conf.unwrap_or(f64::INFINITY),
            seed: 0,
            ref_policy: Some(MarkovPolicy::constant(mdp.shape(), alg.ref_action).map_err(invalid("algorithm.ref_action"))?.into()),
            outcome_channel: alg.channel,
        };
        template.validate().map_err(|e| HarnessError::validation("algorithm", e.to_string()))?;
        let comparators = ComparatorClass::from_value_class(&values);
        Ok(Prepared { mdp, values, rewards, comparators, algorithm: alg.name, template })
    }

    fn build_environment(&self) -> Result<BuiltEnv> {
        const PATH: &str = "environment.params";
        Ok(match &self.environment {
            EnvironmentSpec::HardCase => BuiltEnv::HardCase(env::build_hard_case()),
            EnvironmentSpec::Relu { dimension, epsilon, max_arms, packing_seed, hidden } => {
                if *max_arms == 0 {
                    return Err(HarnessError::validation("environment.params.max_arms", "must be positive"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*packing_seed);
                let theta = env::sphere_packing(*dimension, *epsilon, *max_arms, DEFAULT_PACKING_FAILURES, &mut rng)
                    .map_err(invalid(PATH))?;
                BuiltEnv::Relu(env::build_relu_family(theta, *epsilon, *hidden).map_err(invalid(PATH))?)
            }
            EnvironmentSpec::RandomTabular { num_states, num_actions, horizon, reward_scale, seed, initial_state } => {
                let mdp = env::build_random_tabular(RandomTabularSpec {
                    num_states: *num_states,
                    num_actions: *num_actions,
                    horizon: *horizon,
                    reward_scale: *reward_scale,
                    seed: *seed,
                })
                .map_err(invalid(PATH))?;
                BuiltEnv::Plain(pin_start(mdp, *initial_state)?)
            }
            EnvironmentSpec::DeterministicChain { length, num_actions, seed, initial_state } => {
                let mdp = env::build_deterministic_chain(*length, *num_actions, *seed).map_err(invalid(PATH))?;
                BuiltEnv::Plain(pin_start(mdp, *initial_state)?)
            }
            EnvironmentSpec::File { path } => {
                let file: MdpFile = io::read_json(path)?;
                BuiltEnv::Plain(file.into_mdp()?)
            }
        })
    }

    fn build_classes(&self, built: &BuiltEnv) -> Result<(QClass, Option<RewardClass>)> {
        const PATH: &str = "classes.params";
        let mdp = built.mdp();
        Ok(match &self.classes {
            ClassSpec::HardCase => match built {
                BuiltEnv::HardCase(b) => (b.q_class.clone(), Some(b.r_class.clone())),
                _ => return Err(HarnessError::validation("classes.generator", "hard_case needs the hard_case environment")),
            },
            ClassSpec::ReluHypotheses => match built {
                BuiltEnv::Relu(f) => (f.hypothesis_q_class(), Some(f.hypothesis_reward_class())),
                _ => return Err(HarnessError::validation("classes.generator", "relu_hypotheses needs the relu environment")),
            },
            ClassSpec::SingletonOptimal => (
                QClass::new(vec![optimal_q(mdp)]).map_err(invalid(PATH))?,
                Some(RewardClass::new(vec![mdp.mean_reward().clone()]).map_err(invalid(PATH))?),
            ),
            ClassSpec::PerturbedOptimal { size, scale, seed } => {
                if *size == 0 {
                    return Err(HarnessError::validation("classes.params.size", "must be positive"));
                }
                if !(*scale >= 0.0 && scale.is_finite()) {
                    return Err(HarnessError::validation("classes.params.scale", "must be finite and nonnegative"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let q = classes::perturbed_optimal_class(mdp, *size, *scale, &mut rng).map_err(invalid(PATH))?;
                let r = classes::perturbed_reward_class(mdp, *size, *scale, &mut rng).map_err(invalid(PATH))?;
                (q, Some(r))
            }
            ClassSpec::Random { size, seed } => {
                if *size == 0 {
                    return Err(HarnessError::validation("classes.params.size", "must be positive"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let q = QClass::new(classes::random_tables(mdp.shape(), *size, &mut rng)).map_err(invalid(PATH))?;
                // rescale so every trajectory total stays in [0, 1]
                let h = mdp.horizon() as f64;
                let r = classes::random_tables(mdp.shape(), *size, &mut rng)
                    .into_iter()
                    .map(|t| t.map(|v| v / h))
                    .collect();
                (q, Some(RewardClass::new(r).map_err(invalid(PATH))?))
            }
            ClassSpec::File { path } => {
                let file: ClassesFile = io::read_json(path)?;
                let q = file
                    .q_class(mdp.shape())?
                    .ok_or_else(|| HarnessError::validation("classes.params.path", "file has no q_class"))?;
                (q, file.reward_class(mdp.shape())?)
            }
        })
    }
}

fn pin_start(mdp: TabularMdp, initial_state: Option<usize>) -> Result<TabularMdp> {
    match initial_state {
        None => Ok(mdp),
        Some(s) => mdp.with_initial_state(s).map_err(invalid("environment.params.initial_state")),
    }
}
