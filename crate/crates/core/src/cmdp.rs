//! Contextual MDP primitives: environmental factors, context sampling and the
//! episode contract shared by every environment.
//!
//! A [`Context`] is the raw factor vector `e` (masses, lengths, winds, ...). It is
//! drawn once per episode from a [`ContextSpec`] and stays fixed until the next
//! reset. Only the harness' continuous-adaptation evaluation swaps it mid-episode,
//! through [`Environment::set_context`].

use std::fmt;
use std::hash::{Hash, Hasher};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// How a single factor is drawn at the start of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    /// `default * g` with `g ~ Normal(1, std)`.
    GaussianMultiplicative { std: f64 },
    /// `default + Normal(0, std)`; the absolute reading of a Gaussian "std" column.
    GaussianAbsolute { std: f64 },
    Uniform { low: f64, high: f64 },
    /// Normal(mean, std) restricted to `[low, high]` by rejection.
    TruncatedNormal {
        mean: f64,
        std: f64,
        low: f64,
        high: f64,
    },
    /// Uniform choice among a finite set of values.
    FiniteSet { values: Vec<f64> },
    Fixed { value: f64 },
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DistSpec::GaussianMultiplicative { std } | DistSpec::GaussianAbsolute { std } => {
                *std > 0.0 && std.is_finite()
            }
            DistSpec::Uniform { low, high } => low < high && low.is_finite() && high.is_finite(),
            DistSpec::TruncatedNormal {
                mean,
                std,
                low,
                high,
            } => *std > 0.0 && low < high && mean.is_finite(),
            DistSpec::FiniteSet { values } => {
                !values.is_empty() && values.iter().all(|v| v.is_finite())
            }
            DistSpec::Fixed { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid distribution {self:?}")))
        }
    }

    /// Unclamped draw; `default` anchors the Gaussian variants.
    fn draw(&self, default: f64, rng: &mut Rng) -> f64 {
        match self {
            DistSpec::GaussianMultiplicative { std } => {
                let z: f64 = StandardNormal.sample(rng);
                default * (1.0 + std * z)
            }
            DistSpec::GaussianAbsolute { std } => {
                let z: f64 = StandardNormal.sample(rng);
                default + std * z
            }
            DistSpec::Uniform { low, high } => rng.gen_range(*low..*high),
            DistSpec::TruncatedNormal {
                mean,
                std,
                low,
                high,
            } => {
                for _ in 0..10_000 {
                    let z: f64 = StandardNormal.sample(rng);
                    let v = mean + std * z;
                    if v >= *low && v <= *high {
                        return v;
                    }
                }
                // Negligible-mass window; fall back to the nearest edge.
                mean.clamp(*low, *high)
            }
            DistSpec::FiniteSet { values } => values[rng.gen_range(0..values.len())],
            DistSpec::Fixed { value } => *value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Continuous,
    Integer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub name: String,
    pub default: f64,
    pub low: f64,
    pub high: f64,
    pub kind: FactorKind,
    pub distribution: DistSpec,
}

impl FactorSpec {
    pub fn new(name: &str, default: f64, (low, high): (f64, f64), distribution: DistSpec) -> Self {
        FactorSpec {
            name: name.to_string(),
            default,
            low,
            high,
            kind: FactorKind::Continuous,
            distribution,
        }
    }

    pub fn integer(mut self) -> Self {
        self.kind = FactorKind::Integer;
        self
    }

    fn project(&self, v: f64) -> f64 {
        let v = v.clamp(self.low, self.high);
        match self.kind {
            FactorKind::Continuous => v,
            // Rounding can step outside a non-integral bound; clamp again.
            FactorKind::Integer => v.round().clamp(self.low, self.high),
        }
    }
}

/// Ordered schema of the environmental factors of one environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub factors: Vec<FactorSpec>,
}

impl ContextSpec {
    pub fn new(factors: Vec<FactorSpec>) -> Result<Self> {
        let spec = ContextSpec { factors };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.factors.iter().enumerate() {
            if !(f.low < f.high) {
                return Err(Error::Config(format!(
                    "factor {}: bounds ({}, {}) are empty",
                    f.name, f.low, f.high
                )));
            }
            if !(f.default >= f.low && f.default <= f.high) {
                return Err(Error::Config(format!(
                    "factor {}: default {} outside bounds ({}, {})",
                    f.name, f.default, f.low, f.high
                )));
            }
            if self.factors[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Config(format!("duplicate factor name {}", f.name)));
            }
            f.distribution.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::Config(format!("unknown environmental factor `{name}`")))
    }

    pub fn defaults(&self) -> Context {
        Context::new(self.factors.iter().map(|f| f.default).collect())
    }

    /// Replaces one factor's sampling distribution.
    pub fn set_distribution(&mut self, name: &str, dist: DistSpec) -> Result<()> {
        dist.validate()?;
        let i = self.index_of(name)?;
        self.factors[i].distribution = dist;
        Ok(())
    }

    /// Same spec with every factor pinned to its default.
    pub fn fixed_at_defaults(&self) -> ContextSpec {
        let mut spec = self.clone();
        for f in &mut spec.factors {
            f.distribution = DistSpec::Fixed { value: f.default };
        }
        spec
    }

    /// Checks a context against this spec's length and bounds.
    pub fn check(&self, ctx: &Context) -> Result<()> {
        if ctx.len() != self.len() {
            return Err(Error::Dimension {
                what: "context",
                expected: self.len(),
                got: ctx.len(),
            });
        }
        for (f, &v) in self.factors.iter().zip(ctx.values()) {
            if !(v >= f.low && v <= f.high) {
                return Err(Error::Usage(format!(
                    "factor {} = {v} outside bounds ({}, {})",
                    f.name, f.low, f.high
                )));
            }
        }
        Ok(())
    }

    /// Stable hash of the whole schema including distributions; lets result
    /// records prove which distribution produced them.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for f in &self.factors {
            f.name.hash(&mut h);
            f.default.to_bits().hash(&mut h);
            f.low.to_bits().hash(&mut h);
            f.high.to_bits().hash(&mut h);
            format!("{:?}", f.distribution).hash(&mut h);
        }
        h.finish()
    }
}

/// Draws a context: each factor independently, clamped into bounds, integer
/// factors rounded after clamping.
pub fn sample_context(spec: &ContextSpec, rng: &mut Rng) -> Context {
    Context::new(
        spec.factors
            .iter()
            .map(|f| f.project(f.distribution.draw(f.default, rng)))
            .collect(),
    )
}

/// The raw environmental-factor vector of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Context {
    values: Vec<f64>,
}

impl Context {
    pub fn new(values: Vec<f64>) -> Self {
        Context { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for v in &self.values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

impl fmt::Display for Context {
    /// Comma-separated values in factor order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeOutcome {
    pub total_reward: f64,
    pub steps: usize,
    pub terminated_early: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    /// Box action space, symmetric bounds per component.
    Continuous { dim: usize, bound: f64 },
}

impl ActionSpace {
    /// Width of the policy head output (logits or Gaussian mean).
    pub fn head_dim(&self) -> usize {
        match *self {
            ActionSpace::Discrete(n) => n,
            ActionSpace::Continuous { dim, .. } => dim,
        }
    }

    /// Width of the action when fed back as an input (one-hot for discrete).
    pub fn encoded_dim(&self) -> usize {
        self.head_dim()
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    /// One-hot for discrete actions, raw values for continuous ones.
    pub fn encode(&self, space: ActionSpace) -> Vec<f64> {
        match self {
            Action::Discrete(i) => {
                let mut v = vec![0.0; space.head_dim()];
                if *i < v.len() {
                    v[*i] = 1.0;
                }
                v
            }
            Action::Continuous(a) => a.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Ended by a terminal condition rather than the horizon.
    pub terminated: bool,
}

/// Episode contract every contextual environment honours.
///
/// `reset` fixes the context for the episode; `step` after `done` is a usage error.
pub trait Environment: Send {
    fn id(&self) -> &'static str;
    fn observation_dim(&self) -> usize;
    fn action_space(&self) -> ActionSpace;
    fn context_spec(&self) -> &ContextSpec;
    fn horizon(&self) -> usize;
    fn reset(&mut self, ctx: &Context, rng: &mut Rng) -> Result<Vec<f64>>;
    fn step(&mut self, action: &Action) -> Result<Step>;
    /// The context currently driving the dynamics, if an episode is live.
    fn context(&self) -> Option<&Context>;
    /// Swaps the context of the running episode. Only continuous-adaptation
    /// evaluation calls this.
    fn set_context(&mut self, ctx: &Context) -> Result<()>;
    /// Replaces the accepted factor schema, e.g. with widened bounds for
    /// shifted evaluation. Factor names and order must not change.
    fn set_context_spec(&mut self, spec: ContextSpec) -> Result<()>;
    fn clone_box(&self) -> Box<dyn Environment>;
}

impl Clone for Box<dyn Environment> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn spec() -> ContextSpec {
        ContextSpec::new(vec![
            FactorSpec::new("a", 1.0, (0.1, 10.0), DistSpec::GaussianMultiplicative { std: 2.0 }),
            FactorSpec::new("n", 10.0, (1.0, 100.0), DistSpec::GaussianMultiplicative { std: 0.5 })
                .integer(),
            FactorSpec::new("w", 0.0, (-30.0, 30.0), DistSpec::Uniform { low: -30.0, high: 30.0 }),
        ])
        .unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        let bad_bounds = FactorSpec::new("x", 0.5, (1.0, 0.0), DistSpec::Fixed { value: 0.5 });
        assert!(ContextSpec::new(vec![bad_bounds]).is_err());
        let bad_default = FactorSpec::new("x", 5.0, (0.0, 1.0), DistSpec::Fixed { value: 0.5 });
        assert!(ContextSpec::new(vec![bad_default]).is_err());
        let f = FactorSpec::new("x", 0.5, (0.0, 1.0), DistSpec::Fixed { value: 0.5 });
        assert!(ContextSpec::new(vec![f.clone(), f]).is_err());
        let neg_std = FactorSpec::new("x", 0.5, (0.0, 1.0), DistSpec::GaussianMultiplicative { std: 0.0 });
        assert!(ContextSpec::new(vec![neg_std]).is_err());
        let empty_set = FactorSpec::new("x", 0.5, (0.0, 1.0), DistSpec::FiniteSet { values: vec![] });
        assert!(ContextSpec::new(vec![empty_set]).is_err());
    }

    #[test]
    fn samples_respect_bounds_and_integrality() {
        let spec = spec();
        let mut rng = from_seed(3);
        for _ in 0..100_000 {
            let c = sample_context(&spec, &mut rng);
            spec.check(&c).unwrap();
            assert_eq!(c.values()[1], c.values()[1].round());
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let spec = spec();
        let mut a = from_seed(11);
        let mut b = from_seed(11);
        for _ in 0..100 {
            assert_eq!(sample_context(&spec, &mut a), sample_context(&spec, &mut b));
        }
    }

    #[test]
    fn fixed_spec_is_constant() {
        let spec = spec().fixed_at_defaults();
        let mut rng = from_seed(0);
        let first = sample_context(&spec, &mut rng);
        assert_eq!(first, spec.defaults());
        for _ in 0..1000 {
            assert_eq!(sample_context(&spec, &mut rng), first);
        }
    }

    #[test]
    fn finite_set_and_truncated_normal_support() {
        let mut spec = spec();
        spec.set_distribution("w", DistSpec::FiniteSet { values: vec![-30.0, 30.0] })
            .unwrap();
        spec.set_distribution(
            "a",
            DistSpec::TruncatedNormal { mean: 1.0, std: 5.0, low: 0.5, high: 2.0 },
        )
        .unwrap();
        let mut rng = from_seed(5);
        for _ in 0..10_000 {
            let c = sample_context(&spec, &mut rng);
            assert!(c.values()[2] == -30.0 || c.values()[2] == 30.0);
            assert!((0.5..=2.0).contains(&c.values()[0]));
        }
    }

    #[test]
    fn context_display_is_csv() {
        let c = Context::new(vec![10.0, 9.8, 0.02]);
        assert_eq!(c.to_string(), "10,9.8,0.02");
    }

    #[test]
    fn spec_roundtrips_through_toml() {
        let spec = spec();
        let text = toml::to_string(&spec).unwrap();
        let back: ContextSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    /// Mean of `max(X, low)` for `X ~ N(mu, sigma)` by composite Simpson on the
    /// density, independent of the sampler.
    fn clamped_gaussian_mean(mu: f64, sigma: f64, low: f64) -> (f64, f64) {
        let pdf = |x: f64| {
            (-(x - mu) * (x - mu) / (2.0 * sigma * sigma)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                let x = a + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0
        };
        let lo = mu - 12.0 * sigma;
        let hi = mu + 12.0 * sigma;
        let mass_below = simpson(&pdf, lo, low, 200_000);
        let m1 = low * mass_below + simpson(&|x| x * pdf(x), low, hi, 200_000);
        let m2 = low * low * mass_below + simpson(&|x| x * x * pdf(x), low, hi, 200_000);
        (m1, (m2 - m1 * m1).sqrt())
    }

    #[test]
    fn gaussian_multiplicative_gravity_mean_matches_integration() {
        let spec = ContextSpec::new(vec![FactorSpec::new(
            "gravity",
            9.8,
            (0.1, f64::INFINITY),
            DistSpec::GaussianMultiplicative { std: 0.5 },
        )])
        .unwrap();
        let (mean, sd) = clamped_gaussian_mean(9.8, 4.9, 0.1);
        let n = 100_000;
        let mut rng = from_seed(2024);
        let total: f64 = (0..n).map(|_| sample_context(&spec, &mut rng).values()[0]).sum();
        let emp = total / n as f64;
        let se = sd / (n as f64).sqrt();
        assert!((emp - mean).abs() <= 3.0 * se, "emp {emp} vs {mean} (se {se})");
    }
}
