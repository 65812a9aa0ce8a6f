//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=3,5` runs a subset. Learning runs write their result
//! files under the cargo test temp dir.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use aacc_core::cmdp::{sample_context, Context};
use aacc_core::envs::make_env;
use aacc_core::harness::results::parse_aggregate_csv;
use aacc_core::harness::{run_experiment, sweep, ExperimentConfig, RunOutput};
use aacc_core::neural::gradcheck::random_network_checks;
use aacc_core::oracle::{check_theorem1, check_theorem2, random_instance};
use aacc_core::ppo::buffer::discounted_returns;
use aacc_core::ppo::loss::clipped_term;
use aacc_core::ppo::{ArchVariant, TrainConfig, Trainer, ALL_VARIANTS};
use aacc_core::rng::{from_seed, stream};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run_dir(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn experiment(text: &str) -> RunOutput {
    let cfg = ExperimentConfig::from_toml_str(text).expect("valid acceptance config");
    run_experiment(&cfg, None).expect("run completes")
}

fn final_means(out: &RunOutput) -> Vec<f64> {
    out.seeds.iter().map(|s| s.records.last().unwrap().mean).collect()
}

fn band(xs: &[f64]) -> (f64, f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

fn fmt_band(xs: &[f64]) -> String {
    let (m, lo, hi) = band(xs);
    format!("{m:.1} [{lo:.1}, {hi:.1}]")
}

fn value_identity() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0_f64;
    for seed in 0..10 {
        let (m, pi) = random_instance(seed, 4, 2, 3, 0.95);
        let r = check_theorem1(&m, &pi.table(3), None).unwrap();
        worst = worst.max(r.identity_deviation);
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 1.0,
        format!("max |sum_c p(c) V(c,o) - V(o)| = {worst:.2e} (<= 1e-8), {secs:.3} s (< 1 s)"),
    )
}

fn policy_gradient() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0_f64;
    for seed in 0..10 {
        let (m, pi) = random_instance(seed, 4, 2, 3, 0.95);
        worst = worst.max(check_theorem2(&m, &pi, 1e-6).unwrap().rel_err_finite_difference);
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 10.0,
        format!("max rel err vs central differences = {worst:.2e} (<= 1e-6), {secs:.3} s (< 10 s)"),
    )
}

fn network_gradients() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0_f64;
    let mut n = 0;
    for k in 0..20 {
        for c in random_network_checks(&mut stream(k, "gradcheck", 0)).unwrap() {
            worst = worst.max(c.max_rel_error);
            n += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-4 && secs < 30.0,
        format!("{n} checks over 20 configs, max rel err {worst:.2e} (<= 1e-4), {secs:.3} s (< 30 s)"),
    )
}

fn asymmetry() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for v in [ArchVariant::Aacc, ArchVariant::Robust] {
        let env = make_env("cartpole").unwrap();
        let spec = env.context_spec().clone();
        let mut t = Trainer::new(env, spec.clone(), v, TrainConfig::default(), 0).unwrap();
        let obs = [0.01, -0.2, 0.03, 0.1];
        let base = t.agent.actor_output(&obs, &spec.defaults(), &[]).unwrap();
        let mut rng = from_seed(9);
        let contexts: Vec<Context> = (0..100).map(|_| sample_context(&spec, &mut rng)).collect();
        let same = contexts.iter().all(|c| {
            let out = t.agent.actor_output(&obs, c, &[]).unwrap();
            out.iter().zip(&base).all(|(a, b)| a.to_bits() == b.to_bits())
        });
        pass &= same;
        notes.push(format!("{v}: 100 contexts {}", if same { "bit-identical" } else { "DIFFER" }));
        if v == ArchVariant::Aacc {
            let before = t.agent.critic_encoder.clone().unwrap();
            let buf = t.collect().unwrap();
            let batch = t.prepare_batch(&buf).unwrap();
            for _ in 0..5 {
                t.update_actor(&batch).unwrap();
            }
            let unchanged = t.agent.critic_encoder.as_ref().unwrap() == &before;
            pass &= unchanged;
            notes.push(format!("encoder after 5 actor updates {}", if unchanged { "unchanged" } else { "CHANGED" }));
        }
    }
    outcome(pass, notes.join("; "))
}

fn ppo_mechanics() -> Outcome {
    let mut worst_ratio = 0.0_f64;
    for v in ALL_VARIANTS {
        let env = make_env("pendulum").unwrap();
        let spec = env.context_spec().clone();
        let cfg = TrainConfig {
            batch_size: 400,
            epochs: 2,
            ..TrainConfig::default()
        };
        let mut t = Trainer::new(env, spec, v, cfg, 1).unwrap();
        let m = t.train_iteration().unwrap();
        worst_ratio = worst_ratio.max((m.first_mean_ratio - 1.0).abs());
    }
    let a = clipped_term(1.3, 2.0, 0.2).0;
    let b = clipped_term(0.5, -1.0, 0.2).0;
    let mut rng = from_seed(4);
    let mut worst_ret = 0.0_f64;
    for len in [1usize, 2, 7, 50, 300] {
        let rewards: Vec<f64> = (0..len).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let fast = discounted_returns(&rewards, 0.99);
        for t in 0..len {
            let brute: f64 = (t..len).map(|k| 0.99_f64.powi((k - t) as i32) * rewards[k]).sum();
            worst_ret = worst_ret.max((fast[t] - brute).abs());
        }
    }
    outcome(
        worst_ratio <= 1e-12 && a == 2.4 && b == -0.8 && worst_ret <= 1e-12,
        format!(
            "first-epoch |mean ratio - 1| = {worst_ratio:.1e} over 7 variants; clip cases {a} and {b}; returns vs brute force {worst_ret:.1e}"
        ),
    )
}

fn cartpole_learning() -> Outcome {
    let dir = run_dir("cartpole");
    let out = experiment(&format!(
        r#"
env = "cartpole"
variant = "aacc"
seeds = [0, 1, 2]
total_env_steps = 700000
eval_every = 50000
eval_rollouts = 30
output_dir = "{}"
[train_context]
std = 0.5
"#,
        dir.display()
    ));
    let best: Vec<f64> = out
        .seeds
        .iter()
        .map(|s| s.records.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let reached = best.iter().filter(|&&b| b >= 400.0).count();
    outcome(
        reached >= 2,
        format!(
            "best eval mean per seed within 0.7M steps {:?}; {reached}/3 seeds >= 400 (need 2); final {}",
            best.iter().map(|b| (b * 10.0).round() / 10.0).collect::<Vec<_>>(),
            fmt_band(&final_means(&out))
        ),
    )
}

fn windy_schedules() -> Outcome {
    let mut finals = Vec::new();
    for s in ["uniform", "fix1", "fix2"] {
        let dir = run_dir(&format!("windy_{s}"));
        let out = experiment(&format!(
            r#"
env = "windy"
variant = "aacc"
seeds = [0, 1, 2, 3, 4]
total_env_steps = 200000
eval_every = 50000
eval_rollouts = 30
output_dir = "{}"
[train_context]
schedule = "{s}"
[eval_context]
schedule = "uniform"
"#,
            dir.display()
        ));
        finals.push((s, final_means(&out)));
    }
    let (_, u_lo, _) = band(&finals[0].1);
    let fix_hi = finals[1..].iter().map(|(_, xs)| band(xs).2).fold(f64::NEG_INFINITY, f64::max);
    let means_ordered = finals[1..].iter().all(|(_, xs)| band(&finals[0].1).0 > band(xs).0);
    outcome(
        means_ordered && u_lo > fix_hi,
        format!(
            "final eval on Uniform test: {}",
            finals.iter().map(|(s, xs)| format!("{s} {}", fmt_band(xs))).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn acrobot_ordering() -> Outcome {
    let mut finals = Vec::new();
    for v in ["aacc", "aacc_actor"] {
        let dir = run_dir(&format!("acrobot_{v}"));
        let out = experiment(&format!(
            r#"
env = "acrobot"
variant = "{v}"
seeds = [0, 1, 2, 3, 4]
total_env_steps = 200000
eval_every = 50000
eval_rollouts = 30
output_dir = "{}"
[train_context]
std = 2.0
"#,
            dir.display()
        ));
        finals.push((v, final_means(&out)));
    }
    let pass = band(&finals[0].1).0 >= band(&finals[1].1).0;
    outcome(
        pass,
        format!(
            "final eval mean over 5 seeds: {}",
            finals.iter().map(|(v, xs)| format!("{v} {}", fmt_band(xs))).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn determinism() -> Outcome {
    let mut dirs = Vec::new();
    for k in 0..2 {
        let dir = run_dir(&format!("determinism_{k}"));
        let cfg = dir.with_extension("toml");
        std::fs::create_dir_all(cfg.parent().unwrap()).unwrap();
        std::fs::write(
            &cfg,
            format!(
                r#"
env = "windy"
variant = "aacc"
seeds = [7]
total_env_steps = 12000
eval_every = 4000
eval_rollouts = 5
output_dir = "{}"
[train]
batch_size = 2000
[train_context]
schedule = "uniform"
"#,
                dir.display()
            ),
        )
        .unwrap();
        let ok = Command::new(env!("CARGO_BIN_EXE_aacc"))
            .args(["-q", "train"])
            .arg(&cfg)
            .status()
            .map(|s| s.success())
            .unwrap_or(false);
        if !ok {
            return outcome(false, "train subcommand failed");
        }
        dirs.push(dir);
    }
    let files = ["seed_7.csv", "aggregate.csv"];
    let same = files.iter().all(|f| {
        std::fs::read(dirs[0].join(f)).ok().is_some_and(|a| Some(a) == std::fs::read(dirs[1].join(f)).ok())
    });
    outcome(same, format!("two `train` runs, seed 7: {files:?} byte-identical = {same}"))
}

fn encoder_sweep() -> Outcome {
    let root = run_dir("sweep");
    let text = format!(
        r#"
env = "windy"
variant = "aacc"
seeds = [0, 1]
total_env_steps = 8000
eval_every = 4000
eval_rollouts = 5
output_dir = "{}"
[train]
batch_size = 2000
"#,
        root.display()
    );
    let values: Vec<String> = ["1", "3", "8"].iter().map(|s| s.to_string()).collect();
    if let Err(e) = sweep(&text, "train.encoder_dim", &values, None) {
        return outcome(false, format!("sweep failed: {e}"));
    }
    let mut found = Vec::new();
    for v in &values {
        let p = root.join(format!("train.encoder_dim={v}")).join("aggregate.csv");
        let rows = std::fs::read_to_string(&p).ok().and_then(|t| parse_aggregate_csv(&t).ok());
        if let Some(rows) = rows.filter(|r| !r.is_empty()) {
            found.push(format!("dim {v}: {} rows", rows.len()));
        }
    }
    outcome(found.len() == 3, format!("aggregate CSVs: {}", found.join(", ")))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, bool, Check); 10] = [
        (1, "value decomposition oracle", false, value_identity),
        (2, "asymmetric policy gradient oracle", false, policy_gradient),
        (3, "network gradient checks", false, network_gradients),
        (4, "asymmetry invariance", false, asymmetry),
        (5, "PPO mechanics", false, ppo_mechanics),
        (6, "cart-pole learning", false, cartpole_learning),
        (7, "domain-randomization ordering (windy)", false, windy_schedules),
        (8, "variant ordering on acrobot (soft)", true, acrobot_ordering),
        (9, "determinism", false, determinism),
        (10, "encoder-dim sweep", false, encoder_sweep),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut hard_failures = 0;
    for (id, name, soft, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let tag = match (o.pass, soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft)",
            (false, false) => "FAIL",
        };
        if !o.pass && !soft {
            hard_failures += 1;
        }
        println!("[{tag}] {id:>2}. {name}: {} ({:.1} s)", o.detail, t.elapsed().as_secs_f64());
    }
    if hard_failures == 0 {
        return ExitCode::SUCCESS;
    }
    println!("{hard_failures} criteria failed");
    // Report mode by default; ACCEPTANCE_STRICT=1 turns failures into a failing exit.
    if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
