//! JSON and CSV file formats.
//!
//! Tables are nested arrays indexed `[h][s][a]`; transitions are indexed
//! `[h][s][a][s']` and cover steps `0..H-1`.

use std::fs;
use std::io::Write;
use std::path::Path;

use outcome_rl_core::algorithms::RunTrace;
use outcome_rl_core::classes::{QClass, RewardClass};
use outcome_rl_core::{Error as CoreError, MarkovPolicy, Shape, StepTable, TabularMdp};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub type NestedTable = Vec<Vec<Vec<f64>>>;

/// On-disk MDP description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub initial_dist: Vec<f64>,
    pub mean_reward: NestedTable,
}

impl MdpFile {
    pub fn from_mdp(mdp: &TabularMdp) -> Self {
        let shape = mdp.shape();
        let transitions = (0..shape.horizon.saturating_sub(1))
            .map(|h| {
                (0..shape.num_states)
                    .map(|s| (0..shape.num_actions).map(|a| mdp.transition(h, s, a).to_vec()).collect())
                    .collect()
            })
            .collect();
        Self {
            num_states: shape.num_states,
            num_actions: shape.num_actions,
            horizon: shape.horizon,
            transitions,
            initial_dist: mdp.initial_dist().to_vec(),
            mean_reward: nested_table(mdp.mean_reward()),
        }
    }

    pub fn into_mdp(self) -> Result<TabularMdp> {
        let shape = Shape::new(self.num_states, self.num_actions, self.horizon)
            .map_err(|e| HarnessError::validation("horizon", e.to_string()))?;
        let expected = shape.horizon - 1;
        if self.transitions.len() != expected {
            return Err(HarnessError::validation(
                "transitions",
                format!("expected {expected} steps, found {}", self.transitions.len()),
            ));
        }
        let mut flat = Vec::with_capacity(expected * shape.layer_len() * shape.num_states);
        for (h, layer) in self.transitions.iter().enumerate() {
            check_len(&format!("transitions[{h}]"), layer.len(), shape.num_states)?;
            for (s, row) in layer.iter().enumerate() {
                check_len(&format!("transitions[{h}][{s}]"), row.len(), shape.num_actions)?;
                for (a, next) in row.iter().enumerate() {
                    check_len(&format!("transitions[{h}][{s}][{a}]"), next.len(), shape.num_states)?;
                    flat.extend_from_slice(next);
                }
            }
        }
        check_len("initial_dist", self.initial_dist.len(), shape.num_states)?;
        let reward = table_from_nested(shape, &self.mean_reward, "mean_reward")?;
        TabularMdp::new(shape, flat, self.initial_dist, reward).map_err(|e| {
            let path = match &e {
                CoreError::TransitionRow { h, s, a } => format!("transitions[{h}][{s}][{a}]"),
                CoreError::InitialDistribution => "initial_dist".into(),
                CoreError::RewardRange { h, s, a, .. } => format!("mean_reward[{h}][{s}][{a}]"),
                _ => "mdp".into(),
            };
            HarnessError::validation(path, e.to_string())
        })
    }
}

fn check_len(path: &str, found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(HarnessError::validation(path, format!("expected length {expected}, found {found}")))
    }
}

pub fn nested_table(table: &StepTable) -> NestedTable {
    let shape = table.shape();
    (0..shape.horizon)
        .map(|h| (0..shape.num_states).map(|s| table.row(h, s).to_vec()).collect())
        .collect()
}

pub fn table_from_nested(shape: Shape, nested: &NestedTable, path: &str) -> Result<StepTable> {
    check_len(path, nested.len(), shape.horizon)?;
    let mut flat = Vec::with_capacity(shape.table_len());
    for (h, layer) in nested.iter().enumerate() {
        check_len(&format!("{path}[{h}]"), layer.len(), shape.num_states)?;
        for (s, row) in layer.iter().enumerate() {
            check_len(&format!("{path}[{h}][{s}]"), row.len(), shape.num_actions)?;
            flat.extend_from_slice(row);
        }
    }
    StepTable::from_flat(shape, flat).map_err(|e| HarnessError::validation(path, e.to_string()))
}

/// Function classes on disk. `policies` lists deterministic Markov policies as
/// `[h][s] -> action`; when absent, the greedy policies of `q_class` are used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassesFile {
    #[serde(default)]
    pub q_class: Vec<NestedTable>,
    #[serde(default)]
    pub reward_class: Vec<NestedTable>,
    #[serde(default)]
    pub policies: Vec<Vec<Vec<usize>>>,
}

impl ClassesFile {
    pub fn q_class(&self, shape: Shape) -> Result<Option<QClass>> {
        if self.q_class.is_empty() {
            return Ok(None);
        }
        let tables = self
            .q_class
            .iter()
            .enumerate()
            .map(|(i, t)| table_from_nested(shape, t, &format!("q_class[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        QClass::new(tables).map(Some).map_err(|e| HarnessError::validation("q_class", e.to_string()))
    }

    pub fn reward_class(&self, shape: Shape) -> Result<Option<RewardClass>> {
        if self.reward_class.is_empty() {
            return Ok(None);
        }
        let tables = self
            .reward_class
            .iter()
            .enumerate()
            .map(|(i, t)| table_from_nested(shape, t, &format!("reward_class[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        RewardClass::new(tables).map(Some).map_err(|e| HarnessError::validation("reward_class", e.to_string()))
    }

    pub fn markov_policies(&self, shape: Shape) -> Result<Vec<MarkovPolicy>> {
        self.policies
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let path = format!("policies[{i}]");
                check_len(&path, p.len(), shape.horizon)?;
                for (h, row) in p.iter().enumerate() {
                    check_len(&format!("{path}[{h}]"), row.len(), shape.num_states)?;
                }
                MarkovPolicy::new(shape, p.concat()).map_err(|e| HarnessError::validation(path, e.to_string()))
            })
            .collect()
    }
}

/// Reads a JSON document; parse errors carry the offending field path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_json(&text).map_err(|e| match e {
        HarnessError::Validation { path: field, message } => {
            HarnessError::validation(format!("{}:{field}", path.display()), message)
        }
        other => other,
    })
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        HarnessError::validation(field, e.into_inner().to_string())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub suboptimality: f64,
    pub f_index: usize,
    pub r_index: Option<usize>,
    pub episodes: usize,
}

/// One row per iteration: `t,suboptimality,f_index,r_index,episodes`.
pub fn write_trace_csv<W: Write>(out: W, trace: &RunTrace) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in &trace.records {
        writer.serialize(TraceRow {
            t: r.t,
            suboptimality: r.suboptimality,
            f_index: r.f_index,
            r_index: r.r_index,
            episodes: r.episodes,
        })?;
    }
    writer.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}
