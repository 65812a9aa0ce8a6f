//! Finite contextual MDPs solved exactly by linear algebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Bellman residual above which a linear solve is reported as failed.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Finite CMDP: `P[c][o][a][o']`, `R[c][o][a]`, context prior, start
/// distribution and discount.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularCMDP {
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
    pub context_probs: Vec<f64>,
    pub start: Vec<f64>,
    pub gamma: f64,
}

fn check_simplex(what: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Config(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Draws a probability vector from the flat Dirichlet distribution.
fn dirichlet_one(n: usize, rng: &mut Rng) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / s).collect()
}

impl TabularCMDP {
    pub fn n_contexts(&self) -> usize {
        self.transitions.len()
    }

    pub fn n_obs(&self) -> usize {
        self.start.len()
    }

    pub fn n_actions(&self) -> usize {
        self.rewards[0][0].len()
    }

    pub fn validate(&self) -> Result<()> {
        let (nc, no) = (self.context_probs.len(), self.start.len());
        if nc == 0 || no == 0 || self.rewards.is_empty() || self.rewards[0].is_empty() {
            return Err(Error::Config("empty tabular CMDP".into()));
        }
        let na = self.n_actions();
        if na == 0 {
            return Err(Error::Config("tabular CMDP needs at least one action".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("discount {} outside [0, 1)", self.gamma)));
        }
        check_simplex("context distribution", &self.context_probs)?;
        check_simplex("start distribution", &self.start)?;
        if self.transitions.len() != nc || self.rewards.len() != nc {
            return Err(Error::Config("transition/reward tensors disagree with context count".into()));
        }
        for c in 0..nc {
            if self.transitions[c].len() != no || self.rewards[c].len() != no {
                return Err(Error::Config(format!("context {c}: wrong observation count")));
            }
            for o in 0..no {
                if self.transitions[c][o].len() != na || self.rewards[c][o].len() != na {
                    return Err(Error::Config(format!("context {c}, obs {o}: wrong action count")));
                }
                if self.rewards[c][o].iter().any(|r| !r.is_finite()) {
                    return Err(Error::Config(format!("context {c}, obs {o}: non-finite reward")));
                }
                for a in 0..na {
                    let row = &self.transitions[c][o][a];
                    if row.len() != no {
                        return Err(Error::Config(format!("P[{c}][{o}][{a}] has wrong length")));
                    }
                    check_simplex(&format!("P[{c}][{o}][{a}]"), row)?;
                }
            }
        }
        Ok(())
    }

    /// Seeded random instance: flat-Dirichlet transition rows, context prior
    /// and start distribution; rewards uniform on (-1, 1).
    pub fn random(n_obs: usize, n_actions: usize, n_contexts: usize, gamma: f64, rng: &mut Rng) -> Self {
        let transitions = (0..n_contexts)
            .map(|_| {
                (0..n_obs)
                    .map(|_| (0..n_actions).map(|_| dirichlet_one(n_obs, rng)).collect())
                    .collect()
            })
            .collect();
        let rewards = (0..n_contexts)
            .map(|_| {
                (0..n_obs)
                    .map(|_| (0..n_actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        TabularCMDP {
            transitions,
            rewards,
            context_probs: dirichlet_one(n_contexts, rng),
            start: dirichlet_one(n_obs, rng),
            gamma,
        }
    }

    /// The context-averaged MDP: `P(o'|o,a) = sum_c p(c) P_c`, same for rewards.
    pub fn marginalized(&self) -> TabularCMDP {
        let (no, na) = (self.n_obs(), self.n_actions());
        let mut p = vec![vec![vec![0.0; no]; na]; no];
        let mut r = vec![vec![0.0; na]; no];
        for (c, &w) in self.context_probs.iter().enumerate() {
            for o in 0..no {
                for a in 0..na {
                    r[o][a] += w * self.rewards[c][o][a];
                    for o2 in 0..no {
                        p[o][a][o2] += w * self.transitions[c][o][a][o2];
                    }
                }
            }
        }
        TabularCMDP {
            transitions: vec![p],
            rewards: vec![r],
            context_probs: vec![1.0],
            start: self.start.clone(),
            gamma: self.gamma,
        }
    }
}

/// Observation-only softmax policy.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    pub logits: Vec<Vec<f64>>,
}

/// Action probabilities indexed `[c][o][a]`; lets one solver handle both
/// observation-only and context-dependent policies.
pub type PolicyTable = Vec<Vec<Vec<f64>>>;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

impl TabularPolicy {
    pub fn random(n_obs: usize, n_actions: usize, rng: &mut Rng) -> Self {
        TabularPolicy {
            logits: (0..n_obs)
                .map(|_| (0..n_actions).map(|_| StandardNormal.sample(rng)).collect())
                .collect(),
        }
    }

    pub fn probs(&self) -> Vec<Vec<f64>> {
        self.logits.iter().map(|l| softmax(l)).collect()
    }

    /// The same probabilities under every context.
    pub fn table(&self, n_contexts: usize) -> PolicyTable {
        vec![self.probs(); n_contexts]
    }
}

/// Per-context values and action values of a policy.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextValues {
    /// `V[c][o]`.
    pub v: Vec<Vec<f64>>,
    /// `Q[c][o][a]`.
    pub q: Vec<Vec<Vec<f64>>>,
    /// Largest Bellman residual over all contexts.
    pub residual: f64,
}

/// `P_pi[o][o']` and `R_pi[o]` for one context.
fn policy_chain(m: &TabularCMDP, pi: &[Vec<f64>], c: usize) -> (DMatrix<f64>, DVector<f64>) {
    let (no, na) = (m.n_obs(), m.n_actions());
    let mut p = DMatrix::zeros(no, no);
    let mut r = DVector::zeros(no);
    for o in 0..no {
        for a in 0..na {
            let w = pi[o][a];
            r[o] += w * m.rewards[c][o][a];
            for o2 in 0..no {
                p[(o, o2)] += w * m.transitions[c][o][a][o2];
            }
        }
    }
    (p, r)
}

fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular Bellman system".into()))?;
    Ok(x)
}

/// Solves `(I - gamma P_pi) V = R_pi` for each context and derives `Q`.
pub fn value_per_context(m: &TabularCMDP, pi: &PolicyTable) -> Result<ContextValues> {
    let (no, na) = (m.n_obs(), m.n_actions());
    let mut v = Vec::with_capacity(m.n_contexts());
    let mut q = Vec::with_capacity(m.n_contexts());
    let mut residual = 0.0_f64;
    for c in 0..m.n_contexts() {
        let (p, r) = policy_chain(m, &pi[c], c);
        let a = DMatrix::identity(no, no) - p.clone() * m.gamma;
        let vc = solve(a, &r)?;
        let res = (&r + p * &vc * m.gamma - &vc).amax();
        residual = residual.max(res);
        let qc: Vec<Vec<f64>> = (0..no)
            .map(|o| {
                (0..na)
                    .map(|a| {
                        let next: f64 = (0..no).map(|o2| m.transitions[c][o][a][o2] * vc[o2]).sum();
                        m.rewards[c][o][a] + m.gamma * next
                    })
                    .collect()
            })
            .collect();
        v.push(vc.iter().copied().collect());
        q.push(qc);
    }
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!("Bellman residual {residual:e} exceeds {RESIDUAL_TOL:e}")));
    }
    Ok(ContextValues { v, q, residual })
}

/// Reference values by fixed-point iteration until successive sweeps differ by
/// at most `tol`.
pub fn value_iteration(m: &TabularCMDP, pi: &PolicyTable, tol: f64, max_sweeps: usize) -> Vec<Vec<f64>> {
    let (no, na) = (m.n_obs(), m.n_actions());
    (0..m.n_contexts())
        .map(|c| {
            let mut v = vec![0.0; no];
            for _ in 0..max_sweeps {
                let next: Vec<f64> = (0..no)
                    .map(|o| {
                        (0..na)
                            .map(|a| {
                                let ev: f64 = (0..no).map(|o2| m.transitions[c][o][a][o2] * v[o2]).sum();
                                pi[c][o][a] * (m.rewards[c][o][a] + m.gamma * ev)
                            })
                            .sum()
                    })
                    .collect();
                let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                v = next;
                if diff <= tol {
                    break;
                }
            }
            v
        })
        .collect()
}

/// Two readings of the context-free value `V(o)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalValues {
    /// `sum_c p(c) V(c, o)`.
    pub mixture: Vec<f64>,
    /// Value in the context-averaged MDP. Differs from `mixture` in general,
    /// because averaging dynamics forgets that the context persists.
    pub averaged_mdp: Vec<f64>,
}

pub fn value_marginal(m: &TabularCMDP, pi: &PolicyTable) -> Result<MarginalValues> {
    let vals = value_per_context(m, pi)?;
    let mixture = mix(&m.context_probs, &vals.v);
    // The averaged MDP needs an observation-only policy; use the prior mixture.
    let pi_bar = vec![mix_rows(&m.context_probs, pi)];
    let averaged = value_per_context(&m.marginalized(), &pi_bar)?;
    Ok(MarginalValues {
        mixture,
        averaged_mdp: averaged.v.into_iter().next().expect("one context"),
    })
}

/// `sum_c w[c] x[c][o]`.
pub fn mix(w: &[f64], x: &[Vec<f64>]) -> Vec<f64> {
    let n = x[0].len();
    (0..n).map(|o| w.iter().zip(x).map(|(p, row)| p * row[o]).sum()).collect()
}

/// `sum_c w[c] pi[c][o][a]`.
pub fn mix_rows(w: &[f64], pi: &PolicyTable) -> Vec<Vec<f64>> {
    let (no, na) = (pi[0].len(), pi[0][0].len());
    (0..no)
        .map(|o| (0..na).map(|a| w.iter().zip(pi).map(|(p, t)| p * t[o][a]).sum()).collect())
        .collect()
}

/// Values of the joint chain over `(c, o)` pairs, solved as one system.
/// Contexts never change inside the chain, so this is an independent
/// assembly of the same per-episode process.
pub fn joint_chain_values(m: &TabularCMDP, pi: &PolicyTable) -> Result<Vec<Vec<f64>>> {
    let (nc, no, na) = (m.n_contexts(), m.n_obs(), m.n_actions());
    let n = nc * no;
    let mut a = DMatrix::identity(n, n);
    let mut r = DVector::zeros(n);
    for c in 0..nc {
        for o in 0..no {
            let i = c * no + o;
            for act in 0..na {
                let w = pi[c][o][act];
                r[i] += w * m.rewards[c][o][act];
                for o2 in 0..no {
                    a[(i, c * no + o2)] -= m.gamma * w * m.transitions[c][o][act][o2];
                }
            }
        }
    }
    let x = solve(a.clone(), &r)?;
    let res = (a * &x - &r).amax();
    if res > RESIDUAL_TOL {
        return Err(Error::Numerical(format!("joint Bellman residual {res:e}")));
    }
    Ok((0..nc).map(|c| (0..no).map(|o| x[c * no + o]).collect()).collect())
}

/// `J = sum_c p(c) sum_o rho0(o) V(c, o)`.
pub fn objective(m: &TabularCMDP, pi: &PolicyTable) -> Result<f64> {
    let v = value_per_context(m, pi)?;
    Ok(start_value(m, &v.v))
}

pub fn start_value(m: &TabularCMDP, v: &[Vec<f64>]) -> f64 {
    mix(&m.context_probs, v).iter().zip(&m.start).map(|(v, p)| v * p).sum()
}

/// `J` as a function of observation-only logits.
pub fn objective_of_logits(m: &TabularCMDP, logits: &[Vec<f64>]) -> Result<f64> {
    let pi = TabularPolicy { logits: logits.to_vec() };
    objective(m, &pi.table(m.n_contexts()))
}

/// Discounted occupancy `d_c = (I - gamma P_pi^T)^{-1} rho0` per context.
pub fn occupancy(m: &TabularCMDP, pi: &PolicyTable) -> Result<Vec<Vec<f64>>> {
    let no = m.n_obs();
    let rho = DVector::from_column_slice(&m.start);
    (0..m.n_contexts())
        .map(|c| {
            let (p, _) = policy_chain(m, &pi[c], c);
            let a = DMatrix::identity(no, no) - p.transpose() * m.gamma;
            let d = solve(a.clone(), &rho)?;
            let res = (a * &d - &rho).amax();
            if res > RESIDUAL_TOL {
                return Err(Error::Numerical(format!("occupancy residual {res:e}")));
            }
            Ok(d.iter().copied().collect())
        })
        .collect()
}
