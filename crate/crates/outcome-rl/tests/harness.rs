use std::path::Path;

use outcome_rl::config::{ExperimentConfig, ClassSpec};
use outcome_rl::core::env::build_hard_case;
use outcome_rl::core::mdp::Shape;
use outcome_rl::io::{parse_json, read_trace_csv, MdpFile};
use outcome_rl::{run_experiment, separation_experiment, HarnessError, SeparationParams, SummaryReport};
use serde_json::{json, Value};

fn config(body: Value) -> ExperimentConfig {
    parse_json(&body.to_string()).unwrap()
}

fn hard_case(algorithm: Value, seeds: &[u64], out: &Path) -> ExperimentConfig {
    config(json!({
        "environment": {"name": "hard_case"},
        "classes": {"generator": "hard_case"},
        "algorithm": algorithm,
        "seeds": seeds,
        "output_dir": out,
    }))
}

fn validation_path(result: outcome_rl::Result<impl Sized>) -> String {
    match result {
        Err(HarnessError::Validation { path, .. }) => path,
        Err(other) => panic!("expected a validation error, got {other}"),
        Ok(_) => panic!("expected a validation error"),
    }
}

#[test]
fn repeated_seeds_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = hard_case(json!({"name": "algorithm1", "lambda": 4.0, "iterations": 40}), &[0, 0], dir.path());
    run_experiment(&cfg).unwrap();
    let a = std::fs::read(dir.path().join("trace_0_seed0.csv")).unwrap();
    let b = std::fs::read(dir.path().join("trace_1_seed0.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn summary_is_recomputable_from_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = hard_case(
        json!({"name": "algorithm3", "lambda": 1.0, "iterations": 30, "beta_btl": 5.0}),
        &[3, 4, 5],
        &out,
    );
    let summary = run_experiment(&cfg).unwrap();
    let on_disk: SummaryReport = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary, on_disk);

    let finals: Vec<f64> = summary
        .trace_files
        .iter()
        .map(|f| {
            let rows = read_trace_csv(&out.join(f)).unwrap();
            rows.iter().map(|r| r.suboptimality).sum::<f64>() / rows.len() as f64
        })
        .collect();
    for (x, y) in finals.iter().zip(&summary.final_suboptimality) {
        assert!((x - y).abs() < 1e-15);
    }
    let mean = finals.iter().sum::<f64>() / 3.0;
    assert!((mean - summary.mean_final_suboptimality).abs() < 1e-15);
    assert_eq!(summary.total_episodes, 3 * 30 * 2);

    let mut names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, vec!["out"]);
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 4);
}

#[test]
fn algorithm1_solves_the_hard_case() {
    let dir = tempfile::tempdir().unwrap();
    let seeds: Vec<u64> = (0..10).collect();
    let cfg = hard_case(json!({"name": "algorithm1", "lambda": 16.0, "iterations": 500}), &seeds, dir.path());
    let summary = run_experiment(&cfg).unwrap();
    assert!(summary.mean_final_suboptimality < 0.005, "{}", summary.mean_final_suboptimality);
}

#[test]
fn config_errors_name_the_offending_field() {
    let out = Path::new("unused");
    let bad_lambda = hard_case(json!({"name": "algorithm1", "lambda": -1.0, "iterations": 5}), &[0], out);
    assert_eq!(validation_path(bad_lambda.prepare()), "algorithm.lambda");
    let no_beta = hard_case(json!({"name": "algorithm3", "lambda": 1.0, "iterations": 5}), &[0], out);
    assert_eq!(validation_path(no_beta.prepare()), "algorithm.beta_btl");
    let no_seeds = hard_case(json!({"name": "algorithm1", "lambda": 1.0, "iterations": 5}), &[], out);
    assert_eq!(validation_path(no_seeds.prepare()), "seeds");
    let stochastic = config(json!({
        "environment": {"name": "random_tabular", "params": {"num_states": 3, "num_actions": 2, "horizon": 3}},
        "classes": {"generator": "singleton_optimal"},
        "algorithm": {"name": "algorithm2", "lambda": 1.0, "iterations": 5},
        "seeds": [0],
        "output_dir": "unused",
    }));
    assert_eq!(validation_path(stochastic.prepare()), "algorithm.name");
    let mut wrong_shape = hard_case(json!({"name": "process_baseline", "lambda": 1.0, "iterations": 5}), &[0], out);
    wrong_shape.classes = ClassSpec::File { path: "/nonexistent/classes.json".into() };
    assert!(wrong_shape.prepare().is_err());

    let unknown = parse_json::<ExperimentConfig>(r#"{"environment": {"name": "hard_case"}, "extra": 1}"#);
    assert!(matches!(unknown, Err(HarnessError::Validation { .. })));
}

#[test]
fn every_algorithm_runs_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let chain = config(json!({
        "environment": {"name": "deterministic_chain", "params": {"length": 4, "num_actions": 2, "seed": 1}},
        "classes": {"generator": "perturbed_optimal", "params": {"size": 8, "scale": 0.1, "seed": 2}},
        "algorithm": {"name": "algorithm2", "lambda": 4.0, "iterations": 20},
        "seeds": [0],
        "output_dir": dir.path().join("a2"),
    }));
    assert_eq!(run_experiment(&chain).unwrap().total_episodes, 20);
    let pinned = config(json!({
        "environment": {"name": "random_tabular", "params": {"num_states": 3, "num_actions": 2, "horizon": 3, "initial_state": 0, "seed": 5}},
        "classes": {"generator": "random", "params": {"size": 4, "seed": 1}},
        "algorithm": {"name": "process_baseline", "lambda": 1.0, "iterations": 10, "channel": {"kind": "clipped_gaussian", "sigma": 0.1}},
        "seeds": [0],
        "output_dir": dir.path().join("pb"),
    }));
    assert_eq!(run_experiment(&pinned).unwrap().total_episodes, 30);
}

#[test]
fn mdp_files_round_trip_and_report_shape_errors() {
    let mdp = build_hard_case().mdp;
    let file = MdpFile::from_mdp(&mdp);
    let text = serde_json::to_string(&file).unwrap();
    let back: MdpFile = parse_json(&text).unwrap();
    assert_eq!(back.into_mdp().unwrap(), mdp);

    let mut broken = MdpFile::from_mdp(&mdp);
    broken.transitions[0][1][0] = vec![0.5, 0.4];
    let err = broken.into_mdp().unwrap_err();
    assert!(matches!(&err, HarnessError::Validation { path, .. } if path.starts_with("transitions")), "{err}");

    let mut short = MdpFile::from_mdp(&mdp);
    short.mean_reward.pop();
    assert!(matches!(short.into_mdp(), Err(HarnessError::Validation { .. })));
    assert_eq!(mdp.shape(), Shape::new(2, 2, 2).unwrap());
}

#[test]
fn separation_with_a_generous_budget() {
    let mut params = SeparationParams::new(1, 0.5, vec![0, 1, 2]);
    params.budget = Some(60);
    let report = separation_experiment(&params).unwrap();
    assert_eq!(report.process.successes, 3);
    assert_eq!(report.outcome.successes, 3);
}

#[test]
fn separation_favours_process_feedback_in_six_dimensions() {
    let params = SeparationParams::new(6, 1.0 / 3.0, (0..10).collect());
    let report = separation_experiment(&params).unwrap();
    assert_eq!(report.num_arms, vec![32; 10]);
    assert_eq!(report.process.successes, 10);
    assert!(report.outcome.successes <= 3);
    assert!(report.process.episodes_to_optimal.iter().all(|e| e.is_some()));
}
