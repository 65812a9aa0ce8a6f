//! Stochastic policy heads over the actor network's raw output.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::cmdp::{Action, ActionSpace};
use crate::error::{Error, Result};
use crate::rng::Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Softmax distribution over `n` logits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Categorical;

impl Categorical {
    pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits.iter().map(|l| l - lse).collect()
    }

    pub fn probs(logits: &[f64]) -> Vec<f64> {
        Self::log_softmax(logits).into_iter().map(f64::exp).collect()
    }

    pub fn sample(logits: &[f64], rng: &mut Rng) -> (usize, f64) {
        let logp = Self::log_softmax(logits);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, lp) in logp.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                return (i, *lp);
            }
        }
        let last = logp.len() - 1;
        (last, logp[last])
    }

    pub fn log_prob(logits: &[f64], action: usize) -> f64 {
        Self::log_softmax(logits)[action]
    }

    pub fn entropy(logits: &[f64]) -> f64 {
        Self::log_softmax(logits)
            .iter()
            .map(|lp| -lp.exp() * lp)
            .sum()
    }

    /// `d log p(action) / d logits` = one-hot minus softmax.
    pub fn grad_log_prob(logits: &[f64], action: usize, out: &mut [f64]) {
        for (i, p) in Self::probs(logits).into_iter().enumerate() {
            out[i] = if i == action { 1.0 } else { 0.0 } - p;
        }
    }

    /// `d entropy / d logits` = `-p_i (log p_i + H)`.
    pub fn grad_entropy(logits: &[f64], out: &mut [f64]) {
        let logp = Self::log_softmax(logits);
        let h: f64 = logp.iter().map(|lp| -lp.exp() * lp).sum();
        for (i, lp) in logp.iter().enumerate() {
            out[i] = -lp.exp() * (lp + h);
        }
    }
}

/// Diagonal Gaussian with a state-independent learnable log-std.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalGaussian {
    pub log_std: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn new(dim: usize) -> Self {
        DiagonalGaussian {
            log_std: vec![0.0; dim],
        }
    }

    pub fn sample(&self, mean: &[f64], rng: &mut Rng) -> (Vec<f64>, f64) {
        let a: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let z: f64 = StandardNormal.sample(rng);
                m + ls.exp() * z
            })
            .collect();
        let lp = self.log_prob(mean, &a);
        (a, lp)
    }

    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action)
            .zip(&self.log_std)
            .map(|((m, a), ls)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (LN_2PI + 1.0)).sum()
    }

    /// Gradients of `log p(action)` w.r.t. the mean and the log-std.
    pub fn grad_log_prob(&self, mean: &[f64], action: &[f64], d_mean: &mut [f64], d_log_std: &mut [f64]) {
        for i in 0..mean.len() {
            let var = (2.0 * self.log_std[i]).exp();
            let diff = action[i] - mean[i];
            d_mean[i] = diff / var;
            d_log_std[i] = diff * diff / var - 1.0;
        }
    }
}

/// Action distribution on top of the actor network output.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyHead {
    Categorical { actions: usize },
    DiagonalGaussian(DiagonalGaussian),
}

impl PolicyHead {
    pub fn for_space(space: ActionSpace) -> Self {
        match space {
            ActionSpace::Discrete(n) => PolicyHead::Categorical { actions: n },
            ActionSpace::Continuous { dim, .. } => PolicyHead::DiagonalGaussian(DiagonalGaussian::new(dim)),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            PolicyHead::Categorical { actions } => *actions,
            PolicyHead::DiagonalGaussian(g) => g.log_std.len(),
        }
    }

    fn check(&self, head_input: &[f64]) -> Result<()> {
        if head_input.len() != self.input_dim() {
            return Err(Error::Dimension {
                what: "policy head input",
                expected: self.input_dim(),
                got: head_input.len(),
            });
        }
        Ok(())
    }

    /// Draws an action and returns its exact log-probability.
    pub fn sample(&self, head_input: &[f64], rng: &mut Rng) -> Result<(Action, f64)> {
        self.check(head_input)?;
        Ok(match self {
            PolicyHead::Categorical { .. } => {
                let (a, lp) = Categorical::sample(head_input, rng);
                (Action::Discrete(a), lp)
            }
            PolicyHead::DiagonalGaussian(g) => {
                let (a, lp) = g.sample(head_input, rng);
                (Action::Continuous(a), lp)
            }
        })
    }

    /// Log-probability of a given action.
    pub fn log_prob(&self, head_input: &[f64], action: &Action) -> Result<f64> {
        self.check(head_input)?;
        match (self, action) {
            (PolicyHead::Categorical { actions }, Action::Discrete(a)) if a < actions => {
                Ok(Categorical::log_prob(head_input, *a))
            }
            (PolicyHead::DiagonalGaussian(g), Action::Continuous(a)) if a.len() == g.log_std.len() => {
                Ok(g.log_prob(head_input, a))
            }
            _ => Err(Error::Usage(format!("action {action:?} does not match head {self:?}"))),
        }
    }

    pub fn entropy(&self, head_input: &[f64]) -> f64 {
        match self {
            PolicyHead::Categorical { .. } => Categorical::entropy(head_input),
            PolicyHead::DiagonalGaussian(g) => g.entropy(),
        }
    }

    /// Most likely action: argmax logit or the Gaussian mean.
    pub fn mode(&self, head_input: &[f64]) -> Action {
        match self {
            PolicyHead::Categorical { .. } => {
                let best = head_input
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                Action::Discrete(best.0)
            }
            PolicyHead::DiagonalGaussian(_) => Action::Continuous(head_input.to_vec()),
        }
    }
}
