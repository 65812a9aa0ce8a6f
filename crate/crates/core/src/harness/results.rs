//! Result files: per-seed learning curves, run summary and the cross-seed band.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::eval::EvalRecord;
use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "iteration,env_steps,eval_mean,eval_min,eval_max,eval_std,wall_time_s";
pub const AGGREGATE_HEADER: &str = "env_steps,n_seeds,mean,min,max";

pub fn seed_csv_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

pub fn curve_csv(records: &[EvalRecord]) -> String {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.iteration, r.env_steps, r.mean, r.min, r.max, r.std, r.wall_time_s
        )
        .unwrap();
    }
    s
}

/// One row of the cross-seed band: the seeds' mean eval returns at a cadence point.
#[derive(Clone, Debug, PartialEq)]
pub struct BandRow {
    /// Nominal cadence point (see `EvalRecord::cadence`).
    pub env_steps: usize,
    pub n_seeds: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Groups evaluations by cadence point. Batches hold whole episodes, so seeds
/// cross a cadence boundary at slightly different step counts; the nominal
/// point lines them up. `n_seeds` counts the seeds evaluated at each point.
pub fn aggregate(curves: &[Vec<EvalRecord>]) -> Result<Vec<BandRow>> {
    if curves.is_empty() || curves.iter().any(|c| c.is_empty()) {
        return Err(Error::Usage("aggregate needs at least one evaluation per seed".into()));
    }
    let mut points: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for c in curves {
        let mut seen = std::collections::BTreeSet::new();
        for r in c {
            if !seen.insert(r.cadence) {
                return Err(Error::Usage(format!("two evaluations of one seed at cadence point {}", r.cadence)));
            }
            points.entry(r.cadence).or_default().push(r.mean);
        }
    }
    Ok(points
        .into_iter()
        .map(|(steps, xs)| BandRow {
            env_steps: steps,
            n_seeds: xs.len(),
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            min: xs.iter().cloned().fold(f64::INFINITY, f64::min),
            max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect())
}

pub fn aggregate_csv(rows: &[BandRow]) -> String {
    let mut s = String::from(AGGREGATE_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.env_steps, r.n_seeds, r.mean, r.min, r.max).unwrap();
    }
    s
}

pub fn parse_aggregate_csv(text: &str) -> Result<Vec<BandRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(AGGREGATE_HEADER) {
        return Err(Error::parse("aggregate csv", "missing header"));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(Error::parse("aggregate csv", format!("bad row `{l}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse("aggregate csv", e.to_string()));
            let int = |s: &str| s.parse::<usize>().map_err(|e| Error::parse("aggregate csv", e.to_string()));
            Ok(BandRow {
                env_steps: int(f[0])?,
                n_seeds: int(f[1])?,
                mean: num(f[2])?,
                min: num(f[3])?,
                max: num(f[4])?,
            })
        })
        .collect()
}

/// Parses a per-seed curve back into (iteration, env_steps, mean, min, max, std).
pub fn parse_curve_csv(text: &str) -> Result<Vec<EvalRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::parse("curve csv", "missing header"));
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(Error::parse("curve csv", format!("bad row `{l}`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse("curve csv", e.to_string()));
            let int = |s: &str| s.parse::<usize>().map_err(|e| Error::parse("curve csv", e.to_string()));
            Ok(EvalRecord {
                iteration: int(f[0])?,
                env_steps: int(f[1])?,
                mean: num(f[2])?,
                min: num(f[3])?,
                max: num(f[4])?,
                std: num(f[5])?,
                wall_time_s: num(f[6])?,
                ..EvalRecord::from_returns(Vec::new())
            })
        })
        .collect()
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Final statistics of one seed for the summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub last: EvalRecord,
    pub checkpoint: PathBuf,
    pub adaptation_success: Option<f64>,
}

pub fn summary_text(config_toml: &str, seeds: &[SeedSummary]) -> String {
    let mut s = String::from("[config]\n");
    for line in config_toml.lines() {
        writeln!(s, "  {line}").unwrap();
    }
    for r in seeds {
        writeln!(s, "\n[seed {}]", r.seed).unwrap();
        writeln!(s, "env_steps = {}", r.last.env_steps).unwrap();
        writeln!(s, "final_eval_mean = {}", r.last.mean).unwrap();
        writeln!(s, "final_eval_min = {}", r.last.min).unwrap();
        writeln!(s, "final_eval_max = {}", r.last.max).unwrap();
        writeln!(s, "final_eval_std = {}", r.last.std).unwrap();
        if let Some(p) = r.adaptation_success {
            writeln!(s, "adaptation_success_ratio = {p}").unwrap();
        }
        writeln!(s, "checkpoint = {}", r.checkpoint.display()).unwrap();
    }
    s
}
