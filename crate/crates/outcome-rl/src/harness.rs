//! Multi-seed batch execution and result persistence.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use outcome_rl_core::algorithms::{self, RunTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgorithmName, ExperimentConfig, Prepared};
use crate::error::{HarnessError, Result};
use crate::io;

/// Caps the worker pool; defaults to the number of logical processors.
pub const THREADS_ENV: &str = "OUTCOME_RL_THREADS";

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub algorithm: String,
    pub seeds: Vec<u64>,
    /// Mean per-iteration suboptimality of each run, i.e. the suboptimality
    /// of its uniform output mixture.
    pub final_suboptimality: Vec<f64>,
    pub mean_final_suboptimality: f64,
    pub stderr_final_suboptimality: f64,
    /// Per-iteration suboptimality averaged across seeds.
    pub curve: Vec<f64>,
    pub total_episodes: usize,
    pub trace_files: Vec<String>,
}

impl SummaryReport {
    /// Aggregates per-seed traces, given as `(suboptimality, episodes)` rows.
    pub fn from_rows(algorithm: &str, seeds: &[u64], rows: &[Vec<(f64, usize)>], trace_files: Vec<String>) -> Self {
        let finals: Vec<f64> =
            rows.iter().map(|r| r.iter().map(|x| x.0).sum::<f64>() / r.len().max(1) as f64).collect();
        let (mean, stderr) = mean_and_stderr(&finals);
        let len = rows.iter().map(Vec::len).max().unwrap_or(0);
        let curve = (0..len)
            .map(|i| {
                let vals: Vec<f64> = rows.iter().filter_map(|r| r.get(i).map(|x| x.0)).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        let total_episodes = rows.iter().flatten().map(|x| x.1).sum();
        Self {
            algorithm: algorithm.to_string(),
            seeds: seeds.to_vec(),
            final_suboptimality: finals,
            mean_final_suboptimality: mean,
            stderr_final_suboptimality: stderr,
            curve,
            total_episodes,
            trace_files,
        }
    }
}

/// Sample mean and standard error (zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn worker_threads() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(HarnessError::validation(THREADS_ENV, format!("expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Runs `job` over `items` on a pool sized by [`worker_threads`], keeping order.
pub fn parallel_map<T, U, F>(items: &[T], job: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_threads()?)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(|| items.par_iter().enumerate().map(|(i, x)| job(i, x)).collect()))
}

/// Runs one learner with the given seed.
pub fn run_single(prepared: &Prepared, seed: u64) -> Result<RunTrace> {
    let mut cfg = prepared.template.clone();
    cfg.seed = seed;
    let mdp = &prepared.mdp;
    let f = &prepared.values;
    let g = &prepared.comparators;
    let rewards = || prepared.rewards.as_ref().ok_or_else(|| HarnessError::validation("classes", "missing reward class"));
    let trace = match prepared.algorithm {
        AlgorithmName::Algorithm1 => algorithms::run_algorithm1(mdp, f, rewards()?, g, &cfg)?,
        AlgorithmName::Algorithm2 => algorithms::run_algorithm2(mdp, f, &cfg)?,
        AlgorithmName::Algorithm3 => algorithms::run_algorithm3(mdp, f, rewards()?, g, &cfg)?,
        AlgorithmName::FittedBaseline => algorithms::run_fitted_reward_baseline(mdp, f, rewards()?, g, &cfg)?,
        AlgorithmName::ProcessBaseline => algorithms::run_process_reward_baseline(mdp, f, g, &cfg)?,
    };
    Ok(trace)
}

pub fn trace_file_name(index: usize, seed: u64) -> String {
    format!("trace_{index}_seed{seed}.csv")
}

fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    io::write_trace_csv(BufWriter::new(file), trace)
}

/// Runs every seed, writes one trace CSV per seed and `summary.json`.
///
/// Traces of seeds that finished are written even when another seed fails;
/// the summary is only written when all succeed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SummaryReport> {
    run_experiment_with_traces(cfg).map(|(summary, _)| summary)
}

pub fn run_experiment_with_traces(cfg: &ExperimentConfig) -> Result<(SummaryReport, Vec<RunTrace>)> {
    let prepared = cfg.prepare()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let results = parallel_map(&cfg.seeds, |i, &seed| -> Result<(RunTrace, PathBuf)> {
        let trace = run_single(&prepared, seed)?;
        let path = out.join(trace_file_name(i, seed));
        write_trace(&path, &trace)?;
        Ok((trace, path))
    })?;
    let mut traces = Vec::with_capacity(results.len());
    let mut files = Vec::with_capacity(results.len());
    for r in results {
        let (trace, path) = r?;
        files.push(path.file_name().expect("trace file has a name").to_string_lossy().into_owned());
        traces.push(trace);
    }
    let rows: Vec<Vec<(f64, usize)>> =
        traces.iter().map(|t| t.records.iter().map(|r| (r.suboptimality, r.episodes)).collect()).collect();
    let summary = SummaryReport::from_rows(prepared.algorithm.as_str(), &cfg.seeds, &rows, files);
    io::write_json(&out.join(SUMMARY_FILE), &summary)?;
    Ok((summary, traces))
}
