//! Evaluation rollouts: plain, and with contexts resampled mid-episode.

use rand::Rng as _;

use crate::cmdp::{sample_context, ContextSpec, Environment};
use crate::envs::windy::heading_error_of_observation;
use crate::envs::{Acrobot, CartPole, Dynamics, WindyPointMass};
use crate::error::{Error, Result};
use crate::ppo::Agent;
use crate::rng::{stream, Rng};

/// Statistics of one evaluation round.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub seed: u64,
    pub iteration: usize,
    pub env_steps: usize,
    /// Nominal cadence point this evaluation stands for: 0, a multiple of the
    /// evaluation interval, or the total budget for the final one.
    pub cadence: usize,
    pub returns: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation of the returns.
    pub std: f64,
    pub wall_time_s: f64,
    /// Fingerprint of the distribution the contexts were drawn from.
    pub context_fingerprint: u64,
}

impl EvalRecord {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len().max(1) as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        EvalRecord {
            seed: 0,
            iteration: 0,
            env_steps: 0,
            cadence: 0,
            min: returns.iter().cloned().fold(f64::INFINITY, f64::min),
            max: returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
            returns,
            wall_time_s: 0.0,
            context_fingerprint: 0,
        }
    }
}

/// Random streams for evaluation, independent of training.
#[derive(Clone, Debug)]
pub struct EvalRngs {
    pub context: Rng,
    pub reset: Rng,
    pub action: Rng,
    /// Drawn only when the resample probability is positive.
    pub resample: Rng,
}

impl EvalRngs {
    pub fn derive(seed: u64, role: &str) -> Self {
        EvalRngs {
            context: stream(seed, &format!("{role}/context"), 0),
            reset: stream(seed, &format!("{role}/reset"), 0),
            action: stream(seed, &format!("{role}/action"), 0),
            resample: stream(seed, &format!("{role}/resample"), 0),
        }
    }
}

/// What counts as a successful adaptation episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SuccessRule {
    /// Mean per-step heading error below the threshold (windy).
    MeanHeadingErrorBelow(f64),
    /// Episode survives to the horizon (cart-pole).
    NoEarlyTermination,
    /// Episode reaches the goal before the horizon (acrobot).
    ReachesGoal,
    /// Undiscounted return at least the threshold.
    ReturnAtLeast(f64),
}

impl SuccessRule {
    /// Default per environment; `threshold` overrides the numeric cut-off.
    pub fn for_env(env_id: &str, threshold: Option<f64>) -> Result<Self> {
        Ok(match (env_id, threshold) {
            (WindyPointMass::ID, t) => SuccessRule::MeanHeadingErrorBelow(t.unwrap_or(0.1)),
            (_, Some(t)) => SuccessRule::ReturnAtLeast(t),
            (CartPole::ID, None) => SuccessRule::NoEarlyTermination,
            (Acrobot::ID, None) => SuccessRule::ReachesGoal,
            (other, None) => {
                return Err(Error::Config(format!(
                    "`{other}` has no default success rule; set success_threshold"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub total_reward: f64,
    pub steps: usize,
    pub terminated: bool,
    pub mean_heading_error: f64,
    pub context_changes: usize,
}

impl EpisodeSummary {
    pub fn succeeded(&self, rule: SuccessRule) -> bool {
        match rule {
            SuccessRule::MeanHeadingErrorBelow(t) => self.mean_heading_error < t,
            SuccessRule::NoEarlyTermination => !self.terminated,
            SuccessRule::ReachesGoal => self.terminated,
            SuccessRule::ReturnAtLeast(t) => self.total_reward >= t,
        }
    }
}

/// One stochastic episode; with probability `resample_prob` after each step
/// the context is redrawn from `contexts` and swapped into the running episode.
pub fn eval_episode(
    env: &mut dyn Environment,
    agent: &Agent,
    contexts: &ContextSpec,
    resample_prob: f64,
    rngs: &mut EvalRngs,
) -> Result<EpisodeSummary> {
    let mut ctx = sample_context(contexts, &mut rngs.context);
    let mut obs = env.reset(&ctx, &mut rngs.reset)?;
    let space = env.action_space();
    let windy = env.id() == WindyPointMass::ID;
    let mut prev = vec![0.0; agent.prev_action_dim()];
    let mut s = EpisodeSummary {
        total_reward: 0.0,
        steps: 0,
        terminated: false,
        mean_heading_error: 0.0,
        context_changes: 0,
    };
    loop {
        let (action, _) = agent.act(&obs, &ctx, &prev, &mut rngs.action)?;
        let step = env.step(&action)?;
        prev = action.encode(space);
        obs = step.observation;
        s.total_reward += step.reward;
        s.steps += 1;
        if windy {
            s.mean_heading_error += heading_error_of_observation(&obs);
        }
        if step.done {
            s.terminated = step.terminated;
            break;
        }
        if resample_prob > 0.0 && rngs.resample.gen::<f64>() < resample_prob {
            ctx = sample_context(contexts, &mut rngs.context);
            env.set_context(&ctx)?;
            s.context_changes += 1;
        }
    }
    s.mean_heading_error /= s.steps as f64;
    Ok(s)
}

/// `n` evaluation episodes, each under a fresh draw from `contexts`.
/// Never updates the agent; the parameter fingerprint is checked around it.
pub fn evaluate(
    env: &mut dyn Environment,
    agent: &Agent,
    contexts: &ContextSpec,
    n: usize,
    rngs: &mut EvalRngs,
) -> Result<EvalRecord> {
    Ok(continuous_adaptation_eval(env, agent, contexts, 0.0, n, None, rngs)?.record)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationReport {
    pub record: EvalRecord,
    pub episodes: Vec<EpisodeSummary>,
    /// `None` when no success rule was given.
    pub success_ratio: Option<f64>,
}

pub fn continuous_adaptation_eval(
    env: &mut dyn Environment,
    agent: &Agent,
    contexts: &ContextSpec,
    resample_prob: f64,
    n: usize,
    rule: Option<SuccessRule>,
    rngs: &mut EvalRngs,
) -> Result<AdaptationReport> {
    if n == 0 {
        return Err(Error::Config("evaluation needs at least one rollout".into()));
    }
    if !(0.0..=1.0).contains(&resample_prob) {
        return Err(Error::Config(format!("resample probability {resample_prob} outside [0, 1]")));
    }
    env.set_context_spec(contexts.clone())?;
    let before = agent.fingerprint();
    let episodes = (0..n)
        .map(|_| eval_episode(env, agent, contexts, resample_prob, rngs))
        .collect::<Result<Vec<_>>>()?;
    if agent.fingerprint() != before {
        return Err(Error::Numerical("agent parameters changed during evaluation".into()));
    }
    let mut record = EvalRecord::from_returns(episodes.iter().map(|e| e.total_reward).collect());
    record.context_fingerprint = contexts.fingerprint();
    let success_ratio =
        rule.map(|r| episodes.iter().filter(|e| e.succeeded(r)).count() as f64 / episodes.len() as f64);
    Ok(AdaptationReport {
        record,
        episodes,
        success_ratio,
    })
}
