//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use outcome_rl::config::{AlgorithmName, AlgorithmSpec, ClassSpec, EnvironmentSpec, ExperimentConfig};
use outcome_rl::core::algorithms::{run_algorithm1, run_algorithm2, run_algorithm3, run_fitted_reward_baseline, AlgoConfig};
use outcome_rl::core::classes::{induced_reward_model, perturbed_optimal_class, random_tables};
use outcome_rl::core::coverability::{coverability, coverability_bisection_oracle, coverability_prime, PolicySet};
use outcome_rl::core::decomposition::{perf_diff_decomposition, traj_decomp_check};
use outcome_rl::core::env::{
    build_deterministic_chain, build_hard_case, build_random_tabular, RandomTabularSpec, HARD_CASE_A1, HARD_CASE_S2,
};
use outcome_rl::core::mdp::{
    btl_probability, enumerate_trajectories, greedy, optimal_q, sample_preference, MarkovPolicy, Policy, Shape,
    StepTable, TabularMdp, Trajectory,
};
use outcome_rl::core::OutcomeChannel;
use outcome_rl::harness::{self, parallel_map};
use outcome_rl::separation::{separation_experiment, SeparationParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_instance(rng: &mut ChaCha8Rng) -> TabularMdp {
    let spec = RandomTabularSpec {
        num_states: rng.random_range(1..=6),
        num_actions: rng.random_range(1..=4),
        horizon: rng.random_range(1..=5),
        reward_scale: rng.random_range(0.0..=1.0),
        seed: rng.random(),
    };
    build_random_tabular(spec).expect("valid spec")
}

fn random_policy(shape: Shape, rng: &mut ChaCha8Rng) -> Policy {
    let actions = (0..shape.horizon * shape.num_states).map(|_| rng.random_range(0..shape.num_actions)).collect();
    MarkovPolicy::new(shape, actions).expect("actions in range").into()
}

/// `Σ_h [f_h − R_h − max f_{h+1}(s_{h+1})]` along a trajectory, using the
/// sampled next state rather than an expectation.
fn realized_bellman_sum(f: &StepTable, reward: &StepTable, tau: &Trajectory) -> f64 {
    let steps = tau.steps();
    steps
        .iter()
        .enumerate()
        .map(|(h, &(s, a))| {
            let next = steps.get(h + 1).map_or(0.0, |&(s2, _)| f.state_max(h + 1, s2));
            f.get(h, s, a) - reward.get(h, s, a) - next
        })
        .sum()
}

fn criterion_1() -> Verdict {
    let bundle = build_hard_case();
    let seeds: Vec<u64> = (0..10).collect();
    let runs = parallel_map(&seeds, |_, &seed| {
        let cfg = AlgoConfig::new(1.0, 1000).with_seed(seed);
        run_fitted_reward_baseline(&bundle.mdp, &bundle.q_class, &bundle.r_class, &bundle.g_class, &cfg)
    })
    .expect("pool");
    let mut worst_gap: f64 = 0.0;
    let mut visits = 0;
    for run in runs {
        let trace = run.expect("baseline runs");
        visits += trace.visit_count(1, HARD_CASE_S2, HARD_CASE_A1);
        worst_gap = worst_gap.max((trace.output_suboptimality - 0.01).abs());
    }
    verdict(
        visits == 0 && worst_gap <= 1e-12,
        format!("(s2,a1) visits {visits}, max |subopt - 0.01| = {worst_gap:.1e}"),
    )
}

fn criterion_2() -> Verdict {
    let bundle = build_hard_case();
    let seeds: Vec<u64> = (0..10).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for lambda in [4.0, 16.0] {
        let subopts: Vec<f64> = parallel_map(&seeds, |_, &seed| {
            let cfg = AlgoConfig::new(lambda, 500).with_seed(seed);
            run_algorithm1(&bundle.mdp, &bundle.q_class, &bundle.r_class, &bundle.g_class, &cfg)
                .expect("algorithm 1 runs")
                .output_suboptimality
        })
        .expect("pool");
        let mean = subopts.iter().sum::<f64>() / subopts.len() as f64;
        pass &= mean < 0.005;
        detail.push(format!("lambda {lambda}: mean {mean:.5}"));
    }
    verdict(pass, detail.join(", "))
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_identity: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut worst_star: f64 = 0.0;
    for _ in 0..200 {
        let mdp = random_instance(&mut rng);
        let shape = mdp.shape();
        let f = random_tables(shape, 1, &mut rng).remove(0);
        let h = shape.horizon as f64;
        let proxy = random_tables(shape, 1, &mut rng).remove(0).map(|v| v / h);
        let policy = Policy::from(greedy(&f));
        let terms = perf_diff_decomposition(&mdp, &f, &proxy, &policy);
        worst_identity = worst_identity.max(terms.residual().abs());

        // independent oracle: expectations over enumerated trajectories
        let paths = enumerate_trajectories(&mdp, &policy);
        let mut f_start = 0.0;
        let mut value = 0.0;
        let mut bellman = 0.0;
        let mut reward_gap = 0.0;
        for (tau, p) in &paths {
            let (s1, _) = tau.steps()[0];
            f_start += p * f.state_max(0, s1);
            value += p * mdp.trajectory_reward(tau);
            bellman += p * realized_bellman_sum(&f, &proxy, tau);
            reward_gap += p * (proxy.trajectory_sum(tau) - mdp.trajectory_reward(tau));
        }
        worst_oracle = worst_oracle
            .max((terms.lhs - (f_start - value)).abs())
            .max((terms.bellman_term - bellman).abs())
            .max((terms.reward_term - reward_gap).abs());

        let exact = perf_diff_decomposition(&mdp, &f, mdp.mean_reward(), &policy);
        worst_star = worst_star.max(exact.reward_term.abs()).max((exact.lhs - exact.bellman_term).abs());
    }
    let worst = worst_identity.max(worst_oracle).max(worst_star);
    verdict(
        worst <= 1e-10,
        format!("identity {worst_identity:.1e}, oracle {worst_oracle:.1e}, R_proxy = R* {worst_star:.1e}"),
    )
}

/// `E^{π_ref}[Σ_{ℓ≥h} D_ℓ | s_h = s]` by enumerating continuations.
fn tail_oracle(mdp: &TabularMdp, diff: &StepTable, reference: &Policy, h: usize, s: usize) -> f64 {
    if h >= mdp.horizon() {
        return 0.0;
    }
    let a = reference.action(h, s);
    let mut total = diff.get(h, s, a);
    if h + 1 < mdp.horizon() {
        for (s2, &p) in mdp.transition(h, s, a).iter().enumerate() {
            if p > 0.0 {
                total += p * tail_oracle(mdp, diff, reference, h + 1, s2);
            }
        }
    }
    total
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut worst_oracle: f64 = 0.0;
    let mut tightest = f64::INFINITY;
    for _ in 0..200 {
        let mdp = random_instance(&mut rng);
        let shape = mdp.shape();
        let diff = StepTable::from_fn(shape, |_, _, _| rng.random_range(-1.0..=1.0));
        let policy = random_policy(shape, &mut rng);
        let reference = random_policy(shape, &mut rng);
        let check = traj_decomp_check(&mdp, &diff, &policy, &reference);

        let bar = |h: usize, s: usize| if h == 0 { 0.0 } else { tail_oracle(&mdp, &diff, &reference, h, s) };
        let mut lhs = 0.0;
        for (tau, p) in enumerate_trajectories(&mdp, &policy) {
            let steps = tau.steps();
            for (h, &(s, a)) in steps.iter().enumerate() {
                let next = steps.get(h + 1).map_or(0.0, |&(s2, _)| bar(h + 1, s2));
                let e = diff.get(h, s, a) + next - bar(h, s);
                lhs += p * e * e;
            }
        }
        let mut rhs = 0.0;
        for k in 1..=shape.horizon {
            let rolled = Policy::compose(policy.clone(), reference.clone(), k);
            for (tau, p) in enumerate_trajectories(&mdp, &rolled) {
                let d = diff.trajectory_sum(&tau);
                rhs += p * d * d;
            }
        }
        rhs *= 4.0;
        worst_oracle = worst_oracle.max((lhs - check.lhs).abs()).max((rhs - check.rhs).abs());
        if check.lhs > check.rhs + 1e-12 {
            violations += 1;
        }
        if check.rhs > 0.0 {
            tightest = tightest.min(check.rhs / check.lhs.max(f64::MIN_POSITIVE));
        }
    }
    verdict(
        violations == 0 && worst_oracle <= 1e-9,
        format!("violations {violations}, oracle gap {worst_oracle:.1e}, smallest rhs/lhs {tightest:.3}"),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_gap: f64 = 0.0;
    let mut prime_violations = 0;
    let mut single_ok = true;
    for _ in 0..50 {
        let mdp = random_instance(&mut rng);
        let shape = mdp.shape();
        let count = rng.random_range(1..=6);
        let policies = PolicySet::new((0..count).map(|_| random_policy(shape, &mut rng)).collect()).expect("nonempty");
        let closed = coverability(&mdp, &policies);
        let oracle = coverability_bisection_oracle(&mdp, &policies, 1e-12);
        worst_gap = worst_gap.max((closed - oracle).abs());
        if coverability_prime(&mdp, &policies).expect("valid start states") < closed - 1e-12 {
            prime_violations += 1;
        }
        let single = PolicySet::new(vec![random_policy(shape, &mut rng)]).expect("nonempty");
        single_ok &= coverability(&mdp, &single) == 1.0;
    }
    verdict(
        worst_gap <= 1e-9 && prime_violations == 0 && single_ok,
        format!("max |closed - bisection| {worst_gap:.1e}, C' < C on {prime_violations}, single policy exactly 1: {single_ok}"),
    )
}

/// Every action sequence from every start state.
fn all_paths(mdp: &TabularMdp) -> Vec<Trajectory> {
    let shape = mdp.shape();
    let mut out = Vec::new();
    let sequences = shape.num_actions.pow(shape.horizon as u32);
    for start in 0..shape.num_states {
        for code in 0..sequences {
            let mut c = code;
            let mut s = start;
            let mut steps = Vec::with_capacity(shape.horizon);
            for h in 0..shape.horizon {
                let a = c % shape.num_actions;
                c /= shape.num_actions;
                steps.push((s, a));
                if let Some(next) = mdp.deterministic_next(h, s, a) {
                    s = next;
                }
            }
            out.push(Trajectory::new(shape, steps).expect("valid path"));
        }
    }
    out
}

fn criterion_6() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..20 {
        let mdp = build_deterministic_chain(3, 4, seed).expect("valid chain");
        let q = optimal_q(&mdp);
        for tau in all_paths(&mdp) {
            worst = worst.max((induced_reward_model(&q, &tau) - mdp.trajectory_reward(&tau)).abs());
            checked += 1;
        }
    }
    verdict(worst <= 1e-10, format!("{checked} trajectories, max error {worst:.1e}"))
}

fn criterion_7() -> Verdict {
    let seeds: Vec<u64> = (0..10).collect();
    let tails: Vec<f64> = parallel_map(&seeds, |_, &seed| {
        let mdp = build_deterministic_chain(5, 2, seed).expect("valid chain");
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let values = perturbed_optimal_class(&mdp, 16, 0.1, &mut rng).expect("valid class");
        let cfg = AlgoConfig::new(4.0, 2000).with_seed(seed);
        let trace = run_algorithm2(&mdp, &values, &cfg).expect("algorithm 2 runs");
        trace.records[1500..].iter().map(|r| r.suboptimality).sum::<f64>() / 500.0
    })
    .expect("pool");
    let mean = tails.iter().sum::<f64>() / tails.len() as f64;
    let max = tails.iter().copied().fold(0.0, f64::max);
    verdict(mean < 0.05, format!("mean tail suboptimality {mean:.4} (worst seed {max:.4})"))
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let shape = Shape::new(1, 2, 1).expect("valid shape");
    let plus = Trajectory::new(shape, vec![(0, 0)]).expect("valid");
    let minus = Trajectory::new(shape, vec![(0, 1)]).expect("valid");
    let n = 10_000;
    let mut worst_z: f64 = 0.0;
    let mut tested = 0;
    let mut skipped = 0;
    while tested < 10 {
        let r_plus = rng.random_range(0.0..=1.0);
        let r_minus = rng.random_range(0.0..=1.0);
        let beta = rng.random_range(0.1..=10.0);
        let p = btl_probability(r_plus, r_minus, beta);
        // a standard-error test needs the normal approximation to hold
        if (n as f64) * p * (1.0 - p) < 10.0 {
            skipped += 1;
            continue;
        }
        tested += 1;
        let reward = StepTable::from_flat(shape, vec![r_plus, r_minus]).expect("valid");
        let mdp = TabularMdp::new(shape, vec![], vec![1.0], reward).expect("valid");
        let hits = (0..n).filter(|_| sample_preference(&mdp, &plus, &minus, beta, &mut rng)).count();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        worst_z = worst_z.max((hits as f64 / n as f64 - p).abs() / se);
    }

    let bundle = build_hard_case();
    let seeds: Vec<u64> = (0..10).collect();
    let subopts: Vec<f64> = parallel_map(&seeds, |_, &seed| {
        let mut cfg = AlgoConfig::new(1.0, 2000).with_seed(seed);
        cfg.beta_btl = 5.0;
        run_algorithm3(&bundle.mdp, &bundle.q_class, &bundle.r_class, &bundle.g_class, &cfg)
            .expect("algorithm 3 runs")
            .output_suboptimality
    })
    .expect("pool");
    let worst = subopts.iter().copied().fold(0.0, f64::max);
    verdict(
        worst_z <= 3.0 && worst < 0.005,
        format!("max |z| {worst_z:.2} over 10 triples ({skipped} skipped with n·p·(1-p) < 10), algorithm 3 worst seed suboptimality {worst:.5}"),
    )
}

fn criterion_9() -> Verdict {
    let params = SeparationParams::new(6, 1.0 / 3.0, (0..10).collect());
    let report = separation_experiment(&params).expect("separation runs");
    let min_arms = report.num_arms.iter().copied().min().unwrap_or(0);
    let within = report
        .process
        .episodes_to_optimal
        .iter()
        .zip(&report.budgets)
        .filter(|(e, b)| e.is_some_and(|e| e <= **b))
        .count();
    verdict(
        min_arms >= 16 && report.process.successes >= 9 && within >= 9 && report.outcome.successes <= 5,
        format!(
            "N = {min_arms}, process {}/10, outcome {}/10",
            report.process.successes, report.outcome.successes
        ),
    )
}

fn experiment_configs(out: &Path) -> Vec<ExperimentConfig> {
    let alg = |name, lambda, iterations| AlgorithmSpec {
        name,
        lambda,
        iterations,
        beta_btl: Some(5.0),
        beta_conf: None,
        ref_action: 0,
        channel: OutcomeChannel::Bernoulli,
    };
    let cfg = |i: usize, environment, classes, algorithm| ExperimentConfig {
        environment,
        classes,
        algorithm,
        seeds: vec![0, 1, 2, 0],
        output_dir: out.join(format!("exp{i}")),
    };
    let chain = EnvironmentSpec::DeterministicChain { length: 5, num_actions: 2, seed: 1, initial_state: None };
    let perturbed = ClassSpec::PerturbedOptimal { size: 16, scale: 0.1, seed: 2 };
    vec![
        cfg(0, EnvironmentSpec::HardCase, ClassSpec::HardCase, alg(AlgorithmName::FittedBaseline, 1.0, 300)),
        cfg(1, EnvironmentSpec::HardCase, ClassSpec::HardCase, alg(AlgorithmName::Algorithm1, 16.0, 200)),
        cfg(2, chain, perturbed, alg(AlgorithmName::Algorithm2, 4.0, 300)),
        cfg(3, EnvironmentSpec::HardCase, ClassSpec::HardCase, alg(AlgorithmName::Algorithm3, 1.0, 200)),
        cfg(4, EnvironmentSpec::HardCase, ClassSpec::HardCase, alg(AlgorithmName::ProcessBaseline, 1.0, 100)),
    ]
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for sub in fs::read_dir(dir).expect("output dir") {
        let sub = sub.expect("entry").path();
        for entry in fs::read_dir(&sub).expect("experiment dir") {
            let path = entry.expect("entry").path();
            let key = path.strip_prefix(dir).expect("nested").to_string_lossy().into_owned();
            files.insert(key, fs::read(&path).expect("readable"));
        }
    }
    files
}

fn criterion_10() -> Verdict {
    let first = tempfile::tempdir().expect("tempdir");
    let second = tempfile::tempdir().expect("tempdir");
    for dir in [first.path(), second.path()] {
        for cfg in experiment_configs(dir) {
            harness::run_experiment(&cfg).expect("experiment runs");
        }
    }
    let a = snapshot(first.path());
    let b = snapshot(second.path());
    let csvs = a.keys().filter(|k| k.ends_with(".csv")).count();
    let repeated_seed_match = a.iter().filter(|(k, _)| k.ends_with("trace_0_seed0.csv")).all(|(k, v)| {
        let twin = k.replace("trace_0_seed0.csv", "trace_3_seed0.csv");
        a.get(&twin) == Some(v)
    });
    verdict(
        a == b && csvs == 20 && repeated_seed_match,
        format!("{csvs} trace CSVs compared byte for byte across reruns"),
    )
}

type Criterion = (&'static str, fn() -> Verdict, Option<Duration>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("hard-case trap reproduction", criterion_1, Some(Duration::from_secs(5))),
        ("joint optimism escapes the trap", criterion_2, Some(Duration::from_secs(30))),
        ("performance-difference identities", criterion_3, None),
        ("trajectory decomposition inequality", criterion_4, None),
        ("coverability oracle agreement", criterion_5, None),
        ("deterministic reward identity", criterion_6, None),
        ("residual learner convergence", criterion_7, Some(Duration::from_secs(60))),
        ("preference channel calibration", criterion_8, None),
        ("outcome/process separation", criterion_9, Some(Duration::from_secs(120))),
        ("determinism audit", criterion_10, None),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = v.pass && in_time;
        if !pass {
            failures += 1;
        }
        let budget = limit.map(|l| format!(" (limit {}s)", l.as_secs())).unwrap_or_default();
        println!(
            "acceptance {:>2} {:<38} {} in {:.2}s{}: {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget,
            v.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
