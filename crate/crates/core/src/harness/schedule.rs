//! Named context distributions: domain-randomization schedules for the
//! down-wind factor and the evaluation shifts.

use std::str::FromStr;

use super::config::FactorOverride;
use crate::cmdp::{ContextSpec, DistSpec};
use crate::envs::WindyPointMass;
use crate::envs::Dynamics;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Fix1,
    Fix2,
    Random1,
    Random2,
    Random3,
    Uniform,
}

pub const SCHEDULES: [Schedule; 6] = [
    Schedule::Fix1,
    Schedule::Fix2,
    Schedule::Random1,
    Schedule::Random2,
    Schedule::Random3,
    Schedule::Uniform,
];

impl Schedule {
    pub fn name(self) -> &'static str {
        match self {
            Schedule::Fix1 => "fix1",
            Schedule::Fix2 => "fix2",
            Schedule::Random1 => "random1",
            Schedule::Random2 => "random2",
            Schedule::Random3 => "random3",
            Schedule::Uniform => "uniform",
        }
    }

    /// Distribution of the down-wind factor.
    pub fn down_wind(self) -> DistSpec {
        match self {
            Schedule::Fix1 => DistSpec::Fixed { value: -10.0 },
            Schedule::Fix2 => DistSpec::Fixed { value: 0.0 },
            Schedule::Random1 => DistSpec::FiniteSet { values: vec![-30.0, 30.0] },
            Schedule::Random2 => DistSpec::FiniteSet { values: vec![-30.0, 0.0, 30.0] },
            Schedule::Random3 => DistSpec::FiniteSet {
                values: vec![-30.0, -15.0, 0.0, 15.0, 30.0],
            },
            Schedule::Uniform => DistSpec::Uniform { low: -30.0, high: 30.0 },
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SCHEDULES
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown randomization schedule `{s}`")))
    }
}

/// Per-factor distributions of a schedule: down-wind as named, every other
/// factor pinned to its default. Only the windy environment has a down-wind.
pub fn randomization_schedule(schedule: Schedule, spec: &ContextSpec, env_id: &str) -> Result<Vec<(String, DistSpec)>> {
    if env_id != WindyPointMass::ID {
        return Err(Error::Config(format!(
            "randomization schedules vary the down wind and need the `{}` environment, not `{env_id}`",
            WindyPointMass::ID
        )));
    }
    Ok(spec
        .factors
        .iter()
        .map(|f| {
            let d = if f.name == "down_wind" {
                schedule.down_wind()
            } else {
                DistSpec::Fixed { value: f.default }
            };
            (f.name.clone(), d)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shift {
    /// Truncated normal over the original bounds.
    NewDistribution,
    /// Uniform just outside the training bounds.
    Unseen,
}

impl FromStr for Shift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "new_distribution" => Ok(Shift::NewDistribution),
            "unseen" => Ok(Shift::Unseen),
            _ => Err(Error::Usage(format!("unknown evaluation shift `{s}`"))),
        }
    }
}

impl Shift {
    /// Built-in overrides. Only the windy task has preset rows; other
    /// environments take explicit per-factor overrides in the config.
    pub fn overrides(self, env_id: &str) -> Result<Vec<(String, FactorOverride)>> {
        if env_id != WindyPointMass::ID {
            return Err(Error::Config(format!(
                "no preset `{self:?}` shift for `{env_id}`; list per-factor overrides instead"
            )));
        }
        let ov = match self {
            Shift::NewDistribution => FactorOverride {
                distribution: Some(DistSpec::TruncatedNormal {
                    mean: 0.0,
                    std: 15.0,
                    low: -30.0,
                    high: 30.0,
                }),
                bounds: None,
            },
            Shift::Unseen => FactorOverride {
                distribution: Some(DistSpec::Uniform { low: -35.0, high: -30.0 }),
                bounds: Some([-35.0, 30.0]),
            },
        };
        Ok(["north_wind", "east_wind", "down_wind"]
            .into_iter()
            .map(|n| (n.to_string(), ov.clone()))
            .collect())
    }
}
