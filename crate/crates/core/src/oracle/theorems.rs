//! Exact checks of the context-marginal value identity and of the asymmetric
//! policy-gradient form on tabular CMDPs.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use super::tabular::{
    joint_chain_values, mix, mix_rows, objective_of_logits, occupancy, value_marginal, value_per_context,
    ContextValues, PolicyTable, TabularCMDP, TabularPolicy,
};
use crate::error::{Error, Result};
use crate::rng::{from_seed, Rng};

/// What each step of the value chain rewrites.
pub const CHAIN_STEPS: [&str; 8] = [
    "value is the policy-weighted action value",
    "policy depends on the observation only",
    "swap context expectation and action sum",
    "one-step Bellman backup",
    "context-averaged reward",
    "next-observation value under the context posterior",
    "context-averaged action value",
    "value of episodes started at o with a fresh context",
];

/// Monte-Carlo settings for the rollout estimate of `V(o)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McOptions {
    pub episodes: usize,
    /// Truncation length; the tail is below `gamma^H / (1 - gamma) * max|r|`.
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Report {
    /// `lines[k][o]`: the k-th expression of the chain at observation `o`.
    pub lines: Vec<Vec<f64>>,
    /// `max_o |lines[k+1][o] - lines[k][o]|` for each rewrite step.
    pub step_deviation: Vec<f64>,
    /// `max_o |sum_c p(c) V(c,o) - V(o)|` with `V(o)` from the joint chain.
    pub identity_deviation: f64,
    /// Reading `E_{o'|o,a}[V(o')]` with the prior mixture `sum_c p(c) V(c,o')`
    /// instead of the posterior; nonzero in general.
    pub prior_reading_deviation: f64,
    /// `max_o |mixture - value in the context-averaged MDP|`; diagnostic only.
    pub averaged_mdp_deviation: f64,
    pub monte_carlo: Vec<McEstimate>,
}

impl Theorem1Report {
    pub fn max_step_deviation(&self) -> f64 {
        self.step_deviation.iter().cloned().fold(0.0, f64::max)
    }

    /// First step whose sides differ by more than `tol`.
    pub fn first_broken_step(&self, tol: f64) -> Option<usize> {
        self.step_deviation.iter().position(|&d| d > tol)
    }

    /// Monte-Carlo estimates within `k` standard errors of the analytic value.
    pub fn monte_carlo_agrees(&self, k: f64) -> bool {
        self.monte_carlo
            .iter()
            .zip(&self.lines[0])
            .all(|(mc, v)| (mc.mean - v).abs() <= k * mc.std_error + 1e-12)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.identity_deviation <= tol && self.first_broken_step(tol).is_none() && self.monte_carlo_agrees(4.0)
    }
}

impl fmt::Display for Theorem1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "identity deviation {:.3e}", self.identity_deviation)?;
        for (name, d) in CHAIN_STEPS.iter().zip(&self.step_deviation) {
            writeln!(f, "  step `{name}`: {d:.3e}")?;
        }
        writeln!(f, "  prior-mixture reading of the next value: {:.3e}", self.prior_reading_deviation)?;
        writeln!(f, "  context-averaged MDP value: {:.3e}", self.averaged_mdp_deviation)?;
        for (o, mc) in self.monte_carlo.iter().enumerate() {
            let z = (mc.mean - self.lines[0][o]) / mc.std_error.max(f64::MIN_POSITIVE);
            writeln!(f, "  rollout estimate at o={o}: {:.6} +/- {:.1e} (z = {z:.2})", mc.mean, mc.std_error)?;
        }
        Ok(())
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Evaluates every line of the value chain. `pi` may depend on the context;
/// from the second line on, the observation-only policy is the prior mixture
/// `sum_c p(c) pi(a|c,o)`, which is `pi` itself when it ignores the context.
pub fn check_theorem1(m: &TabularCMDP, pi: &PolicyTable, mc: Option<McOptions>) -> Result<Theorem1Report> {
    m.validate()?;
    let (nc, no, na) = (m.n_contexts(), m.n_obs(), m.n_actions());
    let p = &m.context_probs;
    let vals = value_per_context(m, pi)?;
    let ContextValues { v, q, .. } = &vals;
    let pi_o = mix_rows(p, pi);
    let g = m.gamma;

    let r_bar = |o: usize, a: usize| (0..nc).map(|c| p[c] * m.rewards[c][o][a]).sum::<f64>();
    let next_v = |c: usize, o: usize, a: usize| (0..no).map(|o2| m.transitions[c][o][a][o2] * v[c][o2]).sum::<f64>();
    let per_obs = |f: &dyn Fn(usize) -> f64| (0..no).map(f).collect::<Vec<f64>>();

    let l0 = mix(p, v);
    let l1 = per_obs(&|o| (0..nc).map(|c| p[c] * (0..na).map(|a| pi[c][o][a] * q[c][o][a]).sum::<f64>()).sum());
    let l2 = per_obs(&|o| (0..nc).map(|c| p[c] * (0..na).map(|a| pi_o[o][a] * q[c][o][a]).sum::<f64>()).sum());
    let l3 = per_obs(&|o| (0..na).map(|a| pi_o[o][a] * (0..nc).map(|c| p[c] * q[c][o][a]).sum::<f64>()).sum());
    let l4 = per_obs(&|o| {
        (0..na)
            .map(|a| pi_o[o][a] * (0..nc).map(|c| p[c] * (m.rewards[c][o][a] + g * next_v(c, o, a))).sum::<f64>())
            .sum()
    });
    let l5 = per_obs(&|o| {
        (0..na)
            .map(|a| pi_o[o][a] * (r_bar(o, a) + g * (0..nc).map(|c| p[c] * next_v(c, o, a)).sum::<f64>()))
            .sum()
    });
    // E_{o'|o,a}[V(o')] with V(o') the value given everything seen so far:
    // the context posterior after observing the transition o -a-> o'.
    let posterior_next = |o: usize, a: usize| -> f64 {
        (0..no)
            .map(|o2| {
                let joint: Vec<f64> = (0..nc).map(|c| p[c] * m.transitions[c][o][a][o2]).collect();
                let p_bar: f64 = joint.iter().sum();
                if p_bar == 0.0 {
                    return 0.0;
                }
                let v_post: f64 = (0..nc).map(|c| joint[c] / p_bar * v[c][o2]).sum();
                p_bar * v_post
            })
            .sum()
    };
    let l6 = per_obs(&|o| (0..na).map(|a| pi_o[o][a] * (r_bar(o, a) + g * posterior_next(o, a))).sum());
    let q_bar: Vec<Vec<f64>> = (0..no)
        .map(|o| (0..na).map(|a| (0..nc).map(|c| p[c] * q[c][o][a]).sum()).collect())
        .collect();
    let l7 = per_obs(&|o| (0..na).map(|a| pi_o[o][a] * q_bar[o][a]).sum());
    let rollout = mix(p, &joint_chain_values(m, pi)?);

    let prior_mixture_v = mix(p, v);
    let prior_reading = per_obs(&|o| {
        (0..na)
            .map(|a| {
                let ev: f64 = (0..no)
                    .map(|o2| (0..nc).map(|c| p[c] * m.transitions[c][o][a][o2]).sum::<f64>() * prior_mixture_v[o2])
                    .sum();
                pi_o[o][a] * (r_bar(o, a) + g * ev)
            })
            .sum()
    });

    let lines = vec![l0, l1, l2, l3, l4, l5, l6, l7, rollout];
    let step_deviation = lines.windows(2).map(|w| max_abs_diff(&w[0], &w[1])).collect();
    let identity_deviation = max_abs_diff(&lines[0], &lines[8]);
    let marg = value_marginal(m, pi)?;

    let monte_carlo = match mc {
        None => Vec::new(),
        Some(opts) => {
            let mut rng = from_seed(opts.seed);
            (0..no).map(|o| monte_carlo_value(m, pi, o, opts, &mut rng)).collect()
        }
    };

    Ok(Theorem1Report {
        prior_reading_deviation: max_abs_diff(&prior_reading, &lines[5]),
        averaged_mdp_deviation: max_abs_diff(&marg.mixture, &marg.averaged_mdp),
        lines,
        step_deviation,
        identity_deviation,
        monte_carlo,
    })
}

fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Average truncated discounted return over episodes that start at `o` with a
/// context drawn from the prior.
pub fn monte_carlo_value(m: &TabularCMDP, pi: &PolicyTable, start: usize, opts: McOptions, rng: &mut Rng) -> McEstimate {
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..opts.episodes {
        let c = sample_index(&m.context_probs, rng);
        let mut o = start;
        let (mut ret, mut disc) = (0.0, 1.0);
        for _ in 0..opts.horizon {
            let a = sample_index(&pi[c][o], rng);
            ret += disc * m.rewards[c][o][a];
            disc *= m.gamma;
            o = sample_index(&m.transitions[c][o][a], rng);
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    let n = opts.episodes as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
    }
}

/// `d pi(a|o) / d logit[o][b] = pi(a|o) (1[a=b] - pi(b|o))`.
fn softmax_jacobian(pi: &[f64], a: usize, b: usize) -> f64 {
    pi[a] * (f64::from(u8::from(a == b)) - pi[b])
}

/// Right-hand side of the asymmetric policy-gradient identity: per-context
/// discounted occupancy times the context-aware action value times the score.
pub fn exact_policy_gradient(m: &TabularCMDP, policy: &TabularPolicy) -> Result<Vec<Vec<f64>>> {
    let pi = policy.table(m.n_contexts());
    let vals = value_per_context(m, &pi)?;
    let d = occupancy(m, &pi)?;
    let probs = &pi[0];
    let (no, na) = (m.n_obs(), m.n_actions());
    let mut g = vec![vec![0.0; na]; no];
    for (c, &pc) in m.context_probs.iter().enumerate() {
        for o in 0..no {
            for b in 0..na {
                let s: f64 = (0..na).map(|a| vals.q[c][o][a] * softmax_jacobian(&probs[o], a, b)).sum();
                g[o][b] += pc * d[c][o] * s;
            }
        }
    }
    Ok(g)
}

/// Context-free form: classical policy gradient with the occupancy-weighted
/// marginal action value `Q(o,a) = sum_c p(c) d_c(o) Q(c,o,a) / sum_c p(c) d_c(o)`.
/// Also returns the same expression with the prior-weighted `sum_c p(c) Q(c,o,a)`
/// for comparison.
pub fn marginal_q_gradient(m: &TabularCMDP, policy: &TabularPolicy) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let pi = policy.table(m.n_contexts());
    let vals = value_per_context(m, &pi)?;
    let d = occupancy(m, &pi)?;
    let p = &m.context_probs;
    let probs = &pi[0];
    let (nc, no, na) = (m.n_contexts(), m.n_obs(), m.n_actions());
    let d_bar = mix(p, &d);
    let mut g = vec![vec![0.0; na]; no];
    let mut g_prior = vec![vec![0.0; na]; no];
    for o in 0..no {
        let q_occ: Vec<f64> = (0..na)
            .map(|a| (0..nc).map(|c| p[c] * d[c][o] * vals.q[c][o][a]).sum::<f64>() / d_bar[o])
            .collect();
        let q_prior: Vec<f64> = (0..na).map(|a| (0..nc).map(|c| p[c] * vals.q[c][o][a]).sum()).collect();
        for b in 0..na {
            for a in 0..na {
                let jac = softmax_jacobian(&probs[o], a, b);
                g[o][b] += d_bar[o] * q_occ[a] * jac;
                g_prior[o][b] += d_bar[o] * q_prior[a] * jac;
            }
        }
    }
    Ok((g, g_prior))
}

/// Differentiates the per-context Bellman systems directly:
/// `(I - gamma P_pi) dV = dR_pi + gamma dP_pi V`, then `dJ = sum_c p(c) rho0 . dV_c`.
pub fn implicit_gradient(m: &TabularCMDP, policy: &TabularPolicy) -> Result<Vec<Vec<f64>>> {
    let pi = policy.table(m.n_contexts());
    let vals = value_per_context(m, &pi)?;
    let probs = &pi[0];
    let (no, na) = (m.n_obs(), m.n_actions());
    let rho = DVector::from_column_slice(&m.start);
    let mut g = vec![vec![0.0; na]; no];
    for (c, &pc) in m.context_probs.iter().enumerate() {
        let mut a_mat = DMatrix::identity(no, no);
        for o in 0..no {
            for a in 0..na {
                for o2 in 0..no {
                    a_mat[(o, o2)] -= m.gamma * probs[o][a] * m.transitions[c][o][a][o2];
                }
            }
        }
        // Solve the transposed system once: dJ_c = w . rhs with (I - gamma P)^T w = rho0.
        let w = a_mat
            .transpose()
            .lu()
            .solve(&rho)
            .ok_or_else(|| Error::Numerical("singular Bellman system".into()))?;
        for o in 0..no {
            for b in 0..na {
                // Only row o of R_pi and P_pi moves with logit[o][b].
                let mut rhs = 0.0;
                for a in 0..na {
                    let dp = softmax_jacobian(&probs[o], a, b);
                    let ev: f64 = (0..no).map(|o2| m.transitions[c][o][a][o2] * vals.v[c][o2]).sum();
                    rhs += dp * (m.rewards[c][o][a] + m.gamma * ev);
                }
                g[o][b] += pc * w[o] * rhs;
            }
        }
    }
    Ok(g)
}

/// Central differences of the exact objective in every logit.
pub fn finite_difference_gradient(m: &TabularCMDP, policy: &TabularPolicy, h: f64) -> Result<Vec<Vec<f64>>> {
    let mut logits = policy.logits.clone();
    let mut g = vec![vec![0.0; m.n_actions()]; m.n_obs()];
    for o in 0..m.n_obs() {
        for b in 0..m.n_actions() {
            let x = logits[o][b];
            logits[o][b] = x + h;
            let up = objective_of_logits(m, &logits)?;
            logits[o][b] = x - h;
            let down = objective_of_logits(m, &logits)?;
            logits[o][b] = x;
            g[o][b] = (up - down) / (2.0 * h);
        }
    }
    Ok(g)
}

/// Largest `|a - b| / max(|a|, |b|)` over components where `|reference| > floor`.
pub fn max_relative_error(a: &[Vec<f64>], reference: &[Vec<f64>], floor: f64) -> f64 {
    a.iter()
        .flatten()
        .zip(reference.iter().flatten())
        .filter(|(_, r)| r.abs() > floor)
        .map(|(x, r)| (x - r).abs() / x.abs().max(r.abs()))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem2Report {
    pub asymmetric: Vec<Vec<f64>>,
    pub marginal_q: Vec<Vec<f64>>,
    pub implicit: Vec<Vec<f64>>,
    pub finite_difference: Vec<Vec<f64>>,
    pub rel_err_marginal_q: f64,
    pub rel_err_implicit: f64,
    pub rel_err_finite_difference: f64,
    /// Marginal form with prior-weighted `Q`; diagnostic, not part of the check.
    pub rel_err_prior_weighted_q: f64,
}

/// Components smaller than this are not compared relatively.
pub const GRADIENT_FLOOR: f64 = 1e-8;

impl Theorem2Report {
    pub fn passed(&self, tol: f64) -> bool {
        self.rel_err_marginal_q <= tol && self.rel_err_implicit <= tol && self.rel_err_finite_difference <= tol
    }
}

impl fmt::Display for Theorem2Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "relative error vs finite differences {:.3e}", self.rel_err_finite_difference)?;
        writeln!(f, "  vs context-free marginal-Q form: {:.3e}", self.rel_err_marginal_q)?;
        writeln!(f, "  vs implicit Bellman differentiation: {:.3e}", self.rel_err_implicit)?;
        writeln!(f, "  prior-weighted Q (diagnostic): {:.3e}", self.rel_err_prior_weighted_q)
    }
}

pub fn check_theorem2(m: &TabularCMDP, policy: &TabularPolicy, h: f64) -> Result<Theorem2Report> {
    m.validate()?;
    let asymmetric = exact_policy_gradient(m, policy)?;
    let (marginal_q, prior_q) = marginal_q_gradient(m, policy)?;
    let implicit = implicit_gradient(m, policy)?;
    let finite_difference = finite_difference_gradient(m, policy, h)?;
    Ok(Theorem2Report {
        rel_err_marginal_q: max_relative_error(&marginal_q, &asymmetric, GRADIENT_FLOOR),
        rel_err_implicit: max_relative_error(&implicit, &asymmetric, GRADIENT_FLOOR),
        rel_err_finite_difference: max_relative_error(&asymmetric, &finite_difference, GRADIENT_FLOOR),
        rel_err_prior_weighted_q: max_relative_error(&prior_q, &asymmetric, GRADIENT_FLOOR),
        asymmetric,
        marginal_q,
        implicit,
        finite_difference,
    })
}

/// Advantages under both sign conventions, `[c][o][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Advantages {
    /// `V - Q`, as the identity is printed.
    pub value_minus_q: Vec<Vec<Vec<f64>>>,
    /// `Q - V`, the usual convention and the one the PPO update uses.
    pub q_minus_value: Vec<Vec<Vec<f64>>>,
}

pub fn advantages(vals: &ContextValues) -> Advantages {
    let build = |sign: f64| {
        vals.q
            .iter()
            .zip(&vals.v)
            .map(|(qc, vc)| {
                qc.iter()
                    .zip(vc)
                    .map(|(qo, &v)| qo.iter().map(|&q| sign * (q - v)).collect())
                    .collect()
            })
            .collect()
    };
    Advantages {
        value_minus_q: build(-1.0),
        q_minus_value: build(1.0),
    }
}

/// Seeded instance and observation-only policy.
pub fn random_instance(
    seed: u64,
    n_obs: usize,
    n_actions: usize,
    n_contexts: usize,
    gamma: f64,
) -> (TabularCMDP, TabularPolicy) {
    let mut rng = crate::rng::stream(seed, "oracle-instance", 0);
    let m = TabularCMDP::random(n_obs, n_actions, n_contexts, gamma, &mut rng);
    let pi = TabularPolicy::random(n_obs, n_actions, &mut rng);
    (m, pi)
}

/// Policy whose action probabilities depend on the context, for probing the
/// observation-only assumption.
pub fn context_dependent_policy(m: &TabularCMDP, seed: u64) -> PolicyTable {
    let mut rng = crate::rng::stream(seed, "oracle-context-policy", 0);
    (0..m.n_contexts())
        .map(|_| TabularPolicy::random(m.n_obs(), m.n_actions(), &mut rng).probs())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_context_chain_is_exact() {
        let (m, pi) = random_instance(1, 4, 2, 1, 0.95);
        let r = check_theorem1(&m, &pi.table(1), None).unwrap();
        assert!(r.identity_deviation <= 1e-12);
        assert!(r.max_step_deviation() <= 1e-10, "{r}");
        assert!(r.averaged_mdp_deviation <= 1e-10);
        assert!(r.prior_reading_deviation <= 1e-10);
    }

    #[test]
    fn random_instances_satisfy_the_chain() {
        for seed in 0..10 {
            let (m, pi) = random_instance(seed, 4, 2, 3, 0.95);
            let r = check_theorem1(&m, &pi.table(3), None).unwrap();
            assert!(r.passed(1e-10), "seed {seed}\n{r}");
        }
    }

    #[test]
    fn context_dependent_policy_breaks_the_observation_only_step() {
        let (m, _) = random_instance(3, 4, 2, 3, 0.95);
        let pi = context_dependent_policy(&m, 3);
        let r = check_theorem1(&m, &pi, None).unwrap();
        assert_eq!(r.first_broken_step(1e-6), Some(1), "{r}");
        assert!(r.step_deviation[1] > 1e-3);
        // The pure rewrites in between stay exact; closing the loop back to the
        // rollout value fails by the same amount.
        assert!(r.step_deviation[2..7].iter().all(|&d| d <= 1e-10), "{r}");
        assert!((r.step_deviation[7] - r.step_deviation[1]).abs() <= 1e-10);
    }

    #[test]
    fn prior_reading_of_next_value_is_not_exact() {
        let (m, pi) = random_instance(4, 4, 2, 3, 0.95);
        let r = check_theorem1(&m, &pi.table(3), None).unwrap();
        assert!(r.prior_reading_deviation > 1e-6);
        assert!(r.averaged_mdp_deviation > 1e-6);
    }

    #[test]
    fn monte_carlo_agrees_with_the_mixture() {
        let (m, pi) = random_instance(5, 3, 2, 2, 0.9);
        let opts = McOptions { episodes: 20_000, horizon: 250, seed: 9 };
        let r = check_theorem1(&m, &pi.table(2), Some(opts)).unwrap();
        assert!(r.monte_carlo_agrees(4.0), "{r}");
    }

    #[test]
    fn constant_rewards_have_zero_gradient() {
        let (mut m, pi) = random_instance(6, 4, 2, 3, 0.9);
        for r in m.rewards.iter_mut().flatten().flatten() {
            *r = 0.3;
        }
        let g = exact_policy_gradient(&m, &pi).unwrap();
        assert!(g.iter().flatten().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn myopic_bandit_gradient_in_closed_form() {
        let (mut m, pi) = random_instance(7, 3, 3, 2, 0.0);
        m.start = vec![1.0, 0.0, 0.0];
        let g = exact_policy_gradient(&m, &pi).unwrap();
        let probs = pi.probs();
        let p0 = &probs[0];
        for b in 0..3 {
            // d/dlogit_b sum_c p(c) sum_a pi(a) R(c,0,a)
            let r_bar: Vec<f64> = (0..3).map(|a| (0..2).map(|c| m.context_probs[c] * m.rewards[c][0][a]).sum()).collect();
            let mean: f64 = (0..3).map(|a| p0[a] * r_bar[a]).sum();
            let expect = p0[b] * (r_bar[b] - mean);
            assert!((g[0][b] - expect).abs() <= 1e-14);
        }
        assert!(g[1].iter().chain(&g[2]).all(|&x| x == 0.0));
    }

    #[test]
    fn single_context_reduces_to_classical_policy_gradient() {
        let (m, pi) = random_instance(8, 4, 3, 1, 0.9);
        let r = check_theorem2(&m, &pi, 1e-6).unwrap();
        assert!(r.passed(1e-6), "{r}");
        assert!(r.rel_err_prior_weighted_q <= 1e-12);
    }

    #[test]
    fn gradient_routes_agree_on_random_instances() {
        for seed in 0..10 {
            let (m, pi) = random_instance(seed, 4, 2, 3, 0.95);
            let r = check_theorem2(&m, &pi, 1e-6).unwrap();
            assert!(r.passed(1e-6), "seed {seed}\n{r}");
        }
    }

    #[test]
    fn nearly_deterministic_policy() {
        let (m, mut pi) = random_instance(11, 4, 2, 3, 0.95);
        for (o, row) in pi.logits.iter_mut().enumerate() {
            row[0] = if o % 2 == 0 { 20.0 } else { -20.0 };
            row[1] = -row[0];
        }
        let r = check_theorem2(&m, &pi, 1e-6).unwrap();
        assert!(r.passed(1e-6), "{r}");
        assert!(r.asymmetric.iter().flatten().all(|g| g.abs() < 1e-8));
    }

    #[test]
    fn advantage_signs() {
        let (m, pi) = random_instance(12, 4, 2, 3, 0.95);
        let table = pi.table(3);
        let vals = value_per_context(&m, &table).unwrap();
        let adv = advantages(&vals);
        for c in 0..3 {
            for o in 0..4 {
                let centred: f64 = (0..2).map(|a| table[c][o][a] * adv.q_minus_value[c][o][a]).sum();
                assert!(centred.abs() <= 1e-12);
                for a in 0..2 {
                    assert_eq!(adv.value_minus_q[c][o][a], -adv.q_minus_value[c][o][a]);
                }
            }
        }
    }
}
