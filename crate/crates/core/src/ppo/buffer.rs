//! On-policy rollout storage and return/advantage estimation.

use serde::{Deserialize, Serialize};

use crate::cmdp::{Action, Context};

/// One transition `(o_t, a_t, r_t, o_{t+1}, done)` with the behaviour log-prob.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub obs: Vec<f64>,
    pub action: Action,
    /// Action encoding fed back to RMA actors on the next step.
    pub prev_action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    pub log_prob: f64,
}

/// A whole episode, collected under a single context.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub context: Context,
    pub steps: Vec<StepRecord>,
    /// Ended by a terminal condition rather than the horizon.
    pub terminated: bool,
}

impl EpisodeRecord {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub episodes: Vec<EpisodeRecord>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ep: EpisodeRecord) {
        self.episodes.push(ep);
    }

    pub fn total_steps(&self) -> usize {
        self.episodes.iter().map(|e| e.steps.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.episodes.clear();
    }

    pub fn mean_episode_return(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.episodes.iter().map(EpisodeRecord::total_reward).sum::<f64>() / self.episodes.len() as f64
    }

    /// Per-step discounted return targets, flattened in episode order.
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        self.episodes
            .iter()
            .flat_map(|e| discounted_returns(&e.rewards(), gamma))
            .collect()
    }
}

/// `V_t = sum_{k>=t} gamma^(k-t) r_k` by backward recursion.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Generalised advantage estimation for one episode. `values` has one entry per
/// step; `bootstrap` is the value of the state after the last step (zero when
/// the episode terminated).
pub fn gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_v - values[t];
        acc = delta + gamma * lambda * acc;
        out[t] = acc;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdvantageEstimator {
    /// Discounted Monte-Carlo return minus the critic baseline.
    MonteCarlo,
    Gae { lambda: f64 },
}

impl Default for AdvantageEstimator {
    fn default() -> Self {
        AdvantageEstimator::MonteCarlo
    }
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
/// A constant batch maps to zeros.
pub fn standardize(values: &mut [f64]) {
    let n = values.len();
    if n == 0 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if sd > 0.0 && sd.is_finite() {
        values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}
