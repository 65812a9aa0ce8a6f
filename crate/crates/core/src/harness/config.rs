//! Experiment configuration files (TOML).
//!
//! ```toml
//! env = "windy"
//! variant = "aacc"
//! seeds = [0, 1, 2]
//! total_env_steps = 200000     # env steps per seed
//! eval_every = 20000           # env steps between evaluations
//!
//! [train]
//! batch_size = 4000
//!
//! [train_context]
//! schedule = "uniform"
//!
//! [eval_context]
//! shift = "unseen"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::schedule::{randomization_schedule, Schedule, Shift};
use crate::cmdp::{ContextSpec, DistSpec};
use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::ppo::{ArchVariant, TrainConfig};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "AACC_OUTPUT_ROOT";

/// Per-factor replacement of the sampling distribution and/or bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorOverride {
    pub distribution: Option<DistSpec>,
    pub bounds: Option<[f64; 2]>,
}

/// How contexts are drawn. Layers apply in field order: Gaussian severity,
/// named schedule, named shift, then explicit per-factor overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    /// Replaces the std of every multiplicative-Gaussian factor.
    pub std: Option<f64>,
    /// Domain-randomization schedule name (`fix1`, `random3`, `uniform`, ...).
    pub schedule: Option<String>,
    /// Evaluation shift name (`new_distribution`, `unseen`).
    pub shift: Option<String>,
    /// Pins every factor to its default.
    #[serde(default)]
    pub fixed: bool,
    #[serde(default)]
    pub factors: BTreeMap<String, FactorOverride>,
}

impl ContextConfig {
    pub fn resolve(&self, base: &ContextSpec, env_id: &str) -> Result<ContextSpec> {
        let mut spec = if self.fixed { base.fixed_at_defaults() } else { base.clone() };
        if let Some(std) = self.std {
            if !(std > 0.0) {
                return Err(Error::Config(format!("context std {std} must be positive")));
            }
            for f in &mut spec.factors {
                if let DistSpec::GaussianMultiplicative { std: s } = &mut f.distribution {
                    *s = std;
                }
            }
        }
        if let Some(name) = &self.schedule {
            let schedule = Schedule::from_str(name)?;
            for (factor, dist) in randomization_schedule(schedule, &spec, env_id)? {
                spec.set_distribution(&factor, dist)?;
            }
        }
        if let Some(name) = &self.shift {
            let shift = Shift::from_str(name)?;
            for (factor, ov) in shift.overrides(env_id)? {
                apply_override(&mut spec, &factor, &ov)?;
            }
        }
        for (factor, ov) in &self.factors {
            apply_override(&mut spec, factor, ov)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn apply_override(spec: &mut ContextSpec, name: &str, ov: &FactorOverride) -> Result<()> {
    let i = spec.index_of(name)?;
    if let Some([low, high]) = ov.bounds {
        let f = &mut spec.factors[i];
        f.low = low;
        f.high = high;
    }
    if let Some(d) = &ov.distribution {
        spec.set_distribution(name, d.clone())?;
    }
    Ok(())
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_eval_rollouts() -> usize {
    30
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: String,
    pub variant: ArchVariant,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Env steps per seed.
    pub total_env_steps: usize,
    /// Env steps between evaluations.
    pub eval_every: usize,
    #[serde(default = "default_eval_rollouts")]
    pub eval_rollouts: usize,
    /// Per-step probability of resampling the context during the
    /// continuous-adaptation evaluation; 0 disables it.
    #[serde(default)]
    pub adaptation_resample_prob: f64,
    /// Success cut-off for adaptation episodes; see `SuccessRule`.
    #[serde(default)]
    pub success_threshold: Option<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Write measured seconds into `wall_time_s`; off keeps files reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub train_context: ContextConfig,
    /// Defaults to the training distribution.
    #[serde(default)]
    pub eval_context: Option<ContextConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.eval_every == 0 {
            return fail("eval_every must be positive".into());
        }
        if self.eval_rollouts == 0 {
            return fail("eval_rollouts must be at least 1".into());
        }
        if self.total_env_steps == 0 {
            return fail("total_env_steps must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.adaptation_resample_prob) {
            return fail(format!(
                "adaptation_resample_prob {} outside [0, 1]",
                self.adaptation_resample_prob
            ));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return fail("seeds must be distinct".into());
        }
        self.train.validate()?;
        let env = make_env(&self.env)?;
        self.train.agent_spec(self.variant, env.as_ref())?;
        self.train_spec()?;
        self.eval_spec()?;
        Ok(())
    }

    fn base_spec(&self) -> Result<ContextSpec> {
        Ok(make_env(&self.env)?.context_spec().clone())
    }

    pub fn train_spec(&self) -> Result<ContextSpec> {
        self.train_context.resolve(&self.base_spec()?, &self.env)
    }

    pub fn eval_spec(&self) -> Result<ContextSpec> {
        match &self.eval_context {
            Some(c) => c.resolve(&self.base_spec()?, &self.env),
            None => self.train_spec(),
        }
    }

    /// Output directory after applying the output-root override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if self.output_dir.is_relative() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }
}
