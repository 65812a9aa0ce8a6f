//! The checks behind `aacc verify`: exact tabular identities and
//! finite-difference gradient checks.

use std::fmt;

use crate::error::Result;
use crate::neural::gradcheck::{random_network_checks, FD_STEP};
use crate::oracle::{check_theorem1, check_theorem2, random_instance};
use crate::ppo::gradcheck::agent_loss_checks;
use crate::ppo::{TrainConfig, Trainer, ALL_VARIANTS};
use crate::rng::stream;

pub const VALUE_TOL: f64 = 1e-8;
pub const POLICY_GRADIENT_TOL: f64 = 1e-6;
pub const NETWORK_GRADIENT_TOL: f64 = 1e-4;
pub const INSTANCES: u64 = 10;
pub const NETWORK_CONFIGS: u64 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(CheckLine::passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(
                f,
                "{} {:<40} max deviation {:.3e} (tolerance {:.0e})",
                if l.passed() { "PASS" } else { "FAIL" },
                l.name,
                l.max_deviation,
                l.tolerance
            )?;
        }
        write!(f, "{}", if self.passed() { "all checks passed" } else { "some checks FAILED" })
    }
}

/// Value decomposition over random tabular instances, returning the worst
/// deviation over the instances.
pub fn value_decomposition_line() -> Result<CheckLine> {
    let mut worst = 0.0_f64;
    for seed in 0..INSTANCES {
        let (m, policy) = random_instance(seed, 4, 2, 3, 0.95);
        let r = check_theorem1(&m, &policy.table(m.n_contexts()), None)?;
        worst = worst.max(r.identity_deviation).max(r.max_step_deviation());
    }
    Ok(CheckLine {
        name: "value decomposition (10 instances)".into(),
        max_deviation: worst,
        tolerance: VALUE_TOL,
    })
}

/// Asymmetric policy gradient against finite differences of the exact
/// objective, and against the two other analytic routes.
pub fn policy_gradient_lines() -> Result<Vec<CheckLine>> {
    let (mut fd, mut routes) = (0.0_f64, 0.0_f64);
    for seed in 0..INSTANCES {
        let (m, policy) = random_instance(seed, 4, 2, 3, 0.95);
        let r = check_theorem2(&m, &policy, 1e-6)?;
        fd = fd.max(r.rel_err_finite_difference);
        routes = routes.max(r.rel_err_marginal_q).max(r.rel_err_implicit);
    }
    Ok(vec![
        CheckLine {
            name: "asymmetric policy gradient vs FD".into(),
            max_deviation: fd,
            tolerance: POLICY_GRADIENT_TOL,
        },
        CheckLine {
            name: "asymmetric policy gradient vs Q / implicit".into(),
            max_deviation: routes,
            tolerance: POLICY_GRADIENT_TOL,
        },
    ])
}

/// Network backward passes over random configurations, worst case per part.
pub fn network_gradient_lines() -> Result<Vec<CheckLine>> {
    let mut worst: Vec<(String, f64)> = Vec::new();
    for k in 0..NETWORK_CONFIGS {
        for c in random_network_checks(&mut stream(k, "gradcheck", 0))? {
            match worst.iter_mut().find(|(n, _)| *n == c.name) {
                Some((_, w)) => *w = w.max(c.max_rel_error),
                None => worst.push((c.name, c.max_rel_error)),
            }
        }
    }
    Ok(worst
        .into_iter()
        .map(|(name, w)| CheckLine {
            name,
            max_deviation: w,
            tolerance: NETWORK_GRADIENT_TOL,
        })
        .collect())
}

/// PPO losses of every variant on a short cart-pole batch.
pub fn agent_gradient_lines() -> Result<Vec<CheckLine>> {
    let mut lines = Vec::new();
    for v in ALL_VARIANTS {
        let env = crate::envs::make_env("cartpole")?;
        let spec = env.context_spec().clone();
        let cfg = TrainConfig {
            batch_size: 40,
            hidden: vec![8, 8],
            encoder_hidden: 6,
            entropy_coef: 0.01,
            ..TrainConfig::default()
        };
        let mut t = Trainer::new(env, spec, v, cfg, 3)?;
        let buf = t.collect()?;
        let batch = t.prepare_batch(&buf)?;
        t.update_actor(&batch)?;
        for c in agent_loss_checks(&t.agent, &batch, 0.2, 0.01, FD_STEP)? {
            lines.push(CheckLine {
                name: c.name,
                max_deviation: c.max_rel_error,
                tolerance: NETWORK_GRADIENT_TOL,
            });
        }
    }
    Ok(lines)
}

pub fn run_verification() -> Result<VerifyReport> {
    let mut lines = vec![value_decomposition_line()?];
    lines.extend(policy_gradient_lines()?);
    lines.extend(network_gradient_lines()?);
    lines.extend(agent_gradient_lines()?);
    Ok(VerifyReport { lines })
}
