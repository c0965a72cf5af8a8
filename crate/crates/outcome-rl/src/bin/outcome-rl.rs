use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use outcome_rl::core::coverability::{coverability_prime, coverability_report, PolicySet};
use outcome_rl::core::Policy;
use outcome_rl::io::{self, ClassesFile, MdpFile};
use outcome_rl::{harness, separation, ExperimentConfig, HarnessError, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "outcome-rl", version, about = "Outcome- and preference-feedback RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write traces plus a summary.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Coverability of a policy class in an MDP.
    Coverability { mdp: PathBuf, classes: PathBuf },
    /// Outcome versus process feedback on the ReLU family.
    Separation {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        eps: f64,
        /// Episodes per learner; defaults to twice the number of arms.
        #[arg(long)]
        budget: Option<usize>,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 32)]
        max_arms: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let summary = harness::run_experiment(&cfg)?;
            println!(
                "{}: mean final suboptimality {} (stderr {}) over {} seeds, summary in {}",
                summary.algorithm,
                summary.mean_final_suboptimality,
                summary.stderr_final_suboptimality,
                summary.seeds.len(),
                cfg.output_dir.join(harness::SUMMARY_FILE).display()
            );
        }
        Command::Validate { config } => {
            ExperimentConfig::from_path(&config)?.prepare()?;
            println!("ok");
        }
        Command::Coverability { mdp, classes } => {
            let mdp = io::read_json::<MdpFile>(&mdp)?.into_mdp()?;
            let file: ClassesFile = io::read_json(&classes)?;
            let shape = mdp.shape();
            let policies = if file.policies.is_empty() {
                let class = file
                    .q_class(shape)?
                    .ok_or_else(|| HarnessError::validation("classes", "needs q_class or policies"))?;
                PolicySet::greedy_of(&class)
            } else {
                PolicySet::new(file.markov_policies(shape)?.into_iter().map(Policy::from).collect())?
            };
            let report = coverability_report(&mdp, &policies);
            let out = json!({
                "coverability": report.value,
                "layers": report.layer_values,
                "witness": io::nested_table(&report.witness),
                "coverability_prime": coverability_prime(&mdp, &policies)?,
                "num_policies": policies.members().len(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Separation { d, eps, budget, seeds, max_arms, lambda } => {
            let params = separation::SeparationParams { dimension: d, epsilon: eps, budget, seeds, max_arms, lambda };
            let report = separation::separation_experiment(&params)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
