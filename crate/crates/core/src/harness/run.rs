//! Seeded multi-run training, sweeps and plot-data export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::eval::{continuous_adaptation_eval, evaluate, EvalRecord, EvalRngs, SuccessRule};
use super::results::{
    aggregate, aggregate_csv, curve_csv, parse_aggregate_csv, parse_curve_csv, read_file, seed_csv_name, summary_text,
    write_file, BandRow, SeedSummary,
};
use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::ppo::{Agent, Trainer};

pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Progress callback, called after each evaluation.
pub type Progress<'a> = &'a (dyn Fn(&EvalRecord) + Sync);

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<EvalRecord>,
    pub agent: Agent,
    pub adaptation_success: Option<f64>,
}

/// Cadence point to evaluate at after an iteration took the step count from
/// `before` to `after`: the total budget once reached, else the latest
/// crossed multiple of `cadence`, else nothing.
pub fn cadence_point(before: usize, after: usize, cadence: usize, total: usize) -> Option<usize> {
    let boundary = after / cadence * cadence;
    if after >= total {
        Some(total)
    } else if boundary > before {
        Some(boundary)
    } else {
        None
    }
}

fn eval_agent(cfg: &ExperimentConfig, agent: &Agent, seed: u64, k: usize) -> Result<EvalRecord> {
    let mut env = make_env(&cfg.env)?;
    let spec = cfg.eval_spec()?;
    let mut rngs = EvalRngs::derive(seed, &format!("eval/{k}"));
    evaluate(env.as_mut(), agent, &spec, cfg.eval_rollouts, &mut rngs)
}

/// Trains one seed, evaluating at step 0, at every cadence crossing and at the end.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, progress: Option<Progress>) -> Result<SeedRun> {
    let env = make_env(&cfg.env)?;
    let mut trainer = Trainer::new(env, cfg.train_spec()?, cfg.variant, cfg.train.clone(), seed)?;
    let start = Instant::now();
    let mut records = Vec::new();
    let record = |trainer: &Trainer, cadence: usize, records: &mut Vec<EvalRecord>| -> Result<()> {
        let mut r = eval_agent(cfg, &trainer.agent, seed, records.len())?;
        r.seed = seed;
        r.iteration = trainer.iteration;
        r.env_steps = trainer.env_steps;
        r.cadence = cadence;
        if cfg.record_wall_time {
            r.wall_time_s = start.elapsed().as_secs_f64();
        }
        if let Some(p) = progress {
            p(&r);
        }
        records.push(r);
        Ok(())
    };
    record(&trainer, 0, &mut records)?;
    while trainer.env_steps < cfg.total_env_steps {
        let before = trainer.env_steps;
        trainer.train_iteration()?;
        if let Some(c) = cadence_point(before, trainer.env_steps, cfg.eval_every, cfg.total_env_steps) {
            record(&trainer, c, &mut records)?;
        }
    }
    let adaptation_success = if cfg.adaptation_resample_prob > 0.0 {
        let mut env = make_env(&cfg.env)?;
        let rule = SuccessRule::for_env(&cfg.env, cfg.success_threshold)?;
        let mut rngs = EvalRngs::derive(seed, "adaptation");
        let report = continuous_adaptation_eval(
            env.as_mut(),
            &trainer.agent,
            &cfg.eval_spec()?,
            cfg.adaptation_resample_prob,
            cfg.eval_rollouts,
            Some(rule),
            &mut rngs,
        )?;
        report.success_ratio
    } else {
        None
    };
    Ok(SeedRun {
        seed,
        records,
        agent: trainer.agent,
        adaptation_success,
    })
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub seeds: Vec<SeedRun>,
    pub band: Vec<BandRow>,
}

pub fn checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("seed_{seed}.ckpt"))
}

/// Runs every seed (in parallel) and writes the result files into the
/// config's output directory.
pub fn run_experiment(cfg: &ExperimentConfig, progress: Option<Progress>) -> Result<RunOutput> {
    cfg.validate()?;
    let dir = cfg.resolved_output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let config_text = cfg.to_toml_string();
    write_file(&dir.join(CONFIG_FILE), &config_text)?;

    let seeds = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, s, progress))
        .collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::new();
    for run in &seeds {
        write_file(&dir.join(seed_csv_name(run.seed)), &curve_csv(&run.records))?;
        let ck = checkpoint_path(&dir, run.seed);
        write_file(&ck, &run.agent.to_checkpoint().to_text())?;
        summaries.push(SeedSummary {
            seed: run.seed,
            last: run.records.last().expect("at least the initial evaluation").clone(),
            checkpoint: ck,
            adaptation_success: run.adaptation_success,
        });
    }
    let curves: Vec<Vec<EvalRecord>> = seeds.iter().map(|r| r.records.clone()).collect();
    let band = aggregate(&curves)?;
    write_file(&dir.join(AGGREGATE_FILE), &aggregate_csv(&band))?;
    write_file(&dir.join(SUMMARY_FILE), &summary_text(&config_text, &summaries))?;
    Ok(RunOutput { dir, seeds, band })
}

/// Evaluates a saved checkpoint under the config's evaluation distribution,
/// using the first seed for the evaluation streams.
pub fn eval_checkpoint(checkpoint: &Path, cfg: &ExperimentConfig) -> Result<(EvalRecord, Option<f64>)> {
    let ck = crate::neural::Checkpoint::load(checkpoint)?;
    let env = make_env(&cfg.env)?;
    let spec = cfg.train.agent_spec(cfg.variant, env.as_ref())?;
    let agent = Agent::from_checkpoint(spec, &ck)?;
    let seed = cfg.seeds[0];
    let mut r = eval_agent(cfg, &agent, seed, 0)?;
    r.seed = seed;
    let success = if cfg.adaptation_resample_prob > 0.0 {
        let mut env = make_env(&cfg.env)?;
        let rule = SuccessRule::for_env(&cfg.env, cfg.success_threshold)?;
        continuous_adaptation_eval(
            env.as_mut(),
            &agent,
            &cfg.eval_spec()?,
            cfg.adaptation_resample_prob,
            cfg.eval_rollouts,
            Some(rule),
            &mut EvalRngs::derive(seed, "adaptation"),
        )?
        .success_ratio
    } else {
        None
    };
    Ok((r, success))
}

/// Sets `key` (dotted path, e.g. `train.encoder_dim`) in a parsed config.
pub fn set_dotted(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for p in path {
        table = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// A sweep value as a TOML literal (number, bool, array), else a string.
pub fn parse_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

/// Parses `key=v1,v2,...`.
pub fn parse_vary(spec: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("--vary expects key=v1,v2,..., got `{spec}`")))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(Error::Usage(format!("--vary expects key=v1,v2,..., got `{spec}`")));
    }
    Ok((key.trim().to_string(), values))
}

/// One full experiment per value, each in `<output_dir>/<key>=<value>`.
pub fn sweep(config_text: &str, key: &str, values: &[String], progress: Option<Progress>) -> Result<Vec<RunOutput>> {
    let base: toml::Table = toml::from_str(config_text).map_err(|e| Error::Config(e.to_string()))?;
    let base_cfg = ExperimentConfig::from_toml_str(config_text)?;
    let root = base_cfg.output_dir.clone();
    // Validate every point before any training starts.
    let cfgs = values
        .iter()
        .map(|v| {
            let mut doc = base.clone();
            set_dotted(&mut doc, key, parse_value(v))?;
            let sub = root.join(format!("{key}={v}"));
            set_dotted(&mut doc, "output_dir", toml::Value::String(sub.to_string_lossy().into_owned()))?;
            let text = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
            ExperimentConfig::from_toml_str(&text).map_err(|e| Error::Config(format!("{key}={v}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    cfgs.iter().map(|c| run_experiment(c, progress)).collect()
}

fn band_csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

/// Writes plot-ready CSVs under `<run_dir>/plots`:
/// `learning_curve.csv` (band over seeds), `seed_curves.csv` (long format),
/// and for sweep directories `sweep_curves.csv` and `sweep_final.csv`.
pub fn export_plots(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let plots = run_dir.join("plots");
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<()> {
        let p = plots.join(name);
        write_file(&p, &text)?;
        written.push(p);
        Ok(())
    };

    let agg = run_dir.join(AGGREGATE_FILE);
    if agg.exists() {
        let band = parse_aggregate_csv(&read_file(&agg)?)?;
        emit(
            "learning_curve.csv",
            band_csv(
                "env_steps,mean,min,max",
                band.iter().map(|r| format!("{},{},{},{}", r.env_steps, r.mean, r.min, r.max)),
            ),
        )?;
        let mut rows = Vec::new();
        for (seed, path) in seed_files(run_dir)? {
            for r in parse_curve_csv(&read_file(&path)?)? {
                rows.push(format!("{seed},{},{},{},{}", r.env_steps, r.mean, r.min, r.max));
            }
        }
        emit("seed_curves.csv", band_csv("seed,env_steps,eval_mean,eval_min,eval_max", rows))?;
    }

    let mut curves = Vec::new();
    let mut finals = Vec::new();
    for (label, path) in sweep_points(run_dir)? {
        let band = parse_aggregate_csv(&read_file(&path)?)?;
        for r in &band {
            curves.push(format!("{label},{},{},{},{}", r.env_steps, r.mean, r.min, r.max));
        }
        if let Some(r) = band.last() {
            finals.push(format!("{label},{},{},{},{}", r.env_steps, r.mean, r.min, r.max));
        }
    }
    if !finals.is_empty() {
        emit("sweep_curves.csv", band_csv("point,env_steps,mean,min,max", curves))?;
        emit("sweep_final.csv", band_csv("point,env_steps,mean,min,max", finals))?;
    }
    if written.is_empty() {
        return Err(Error::Usage(format!(
            "{} holds neither {AGGREGATE_FILE} nor sweep sub-directories",
            run_dir.display()
        )));
    }
    Ok(written)
}

fn sorted_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    v.sort();
    Ok(v)
}

fn seed_files(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out: Vec<(u64, PathBuf)> = sorted_dir(dir)?
        .into_iter()
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let seed = name.strip_prefix("seed_")?.strip_suffix(".csv")?.parse().ok()?;
            Some((seed, p))
        })
        .collect();
    out.sort_by_key(|(s, _)| *s);
    Ok(out)
}

fn sweep_points(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    Ok(sorted_dir(dir)?
        .into_iter()
        .filter(|p| p.is_dir() && p.join(AGGREGATE_FILE).exists())
        .filter_map(|p| {
            let label = p.file_name()?.to_str()?.to_string();
            Some((label, p.join(AGGREGATE_FILE)))
        })
        .collect())
}

/// Human-readable listing of a run's final band.
pub fn describe(out: &RunOutput) -> String {
    let mut s = String::new();
    writeln!(s, "results in {}", out.dir.display()).unwrap();
    if let Some(r) = out.band.last() {
        writeln!(
            s,
            "final eval over {} seeds at {} env steps: mean {:.2}, min {:.2}, max {:.2}",
            r.n_seeds, r.env_steps, r.mean, r.min, r.max
        )
        .unwrap();
    }
    for run in &out.seeds {
        if let Some(p) = run.adaptation_success {
            writeln!(s, "seed {}: adaptation success ratio {p}", run.seed).unwrap();
        }
    }
    s
}
