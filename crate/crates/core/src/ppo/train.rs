//! The PPO loop: collect whole episodes under freshly sampled contexts, build
//! return targets and advantages, then alternate actor and critic(+encoder)
//! updates for a fixed number of epochs.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::agent::{ActorGrads, ActorStats, Agent, AgentSpec, Batch, CriticGrads};
use super::buffer::{discounted_returns, gae, standardize, AdvantageEstimator, EpisodeRecord, RolloutBuffer, StepRecord};
use super::variant::ArchVariant;
use crate::cmdp::{sample_context, Context, ContextSpec, Environment};
use crate::envs::default_encoder_dim;
use crate::error::{Error, Result};
use crate::neural::{Adam, PolicyHead};
use crate::rng::{stream, Rng};

/// PPO hyperparameters. Defaults follow the shared comparative setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub clip: f64,
    /// Update epochs per iteration.
    pub epochs: usize,
    /// Minimum env steps collected per iteration (whole episodes).
    pub batch_size: usize,
    /// Rows per gradient step; 0 means full batch.
    pub minibatch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_encoder: f64,
    /// Encoder output width; `None` uses the per-environment default.
    pub encoder_dim: Option<usize>,
    /// Actor-side encoder width for the hybrid variant; defaults to `encoder_dim`.
    pub actor_encoder_dim: Option<usize>,
    pub encoder_hidden: usize,
    pub hidden: Vec<usize>,
    pub advantage: AdvantageEstimator,
    pub standardize_advantages: bool,
    pub entropy_coef: f64,
    /// Feed raw factors where the variant would use an encoder.
    pub use_encoder: bool,
    /// Subset of factor names the agent may see; `None` means all.
    pub factors: Option<Vec<String>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            clip: 0.2,
            epochs: 30,
            batch_size: 4000,
            minibatch_size: 0,
            lr_actor: 3e-4,
            lr_critic: 1e-3,
            lr_encoder: 5e-4,
            encoder_dim: None,
            actor_encoder_dim: None,
            encoder_hidden: 32,
            hidden: vec![64, 64],
            advantage: AdvantageEstimator::MonteCarlo,
            standardize_advantages: true,
            entropy_coef: 0.0,
            use_encoder: true,
            factors: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in (0, 1)");
        }
        if !(self.clip > 0.0) {
            return fail("clip ratio must be positive");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        for (name, lr) in [
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("lr_encoder", self.lr_encoder),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return fail(&format!("{name} must be positive"));
            }
        }
        if self.encoder_dim == Some(0) || self.actor_encoder_dim == Some(0) || self.encoder_hidden == 0 {
            return fail("encoder widths must be positive");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return fail("hidden widths must be positive");
        }
        if let AdvantageEstimator::Gae { lambda } = self.advantage {
            if !(0.0..=1.0).contains(&lambda) {
                return fail("GAE lambda must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// Agent shapes for an environment.
    pub fn agent_spec(&self, variant: ArchVariant, env: &dyn Environment) -> Result<AgentSpec> {
        let spec = env.context_spec();
        let factor_select = match &self.factors {
            None => (0..spec.len()).collect(),
            Some(names) => names.iter().map(|n| spec.index_of(n)).collect::<Result<Vec<_>>>()?,
        };
        let encoder_dim = self.encoder_dim.unwrap_or_else(|| default_encoder_dim(env.id()));
        Ok(AgentSpec {
            variant,
            env_id: env.id().to_string(),
            obs_dim: env.observation_dim(),
            action_space: env.action_space(),
            factor_select,
            encoder_dim,
            actor_encoder_dim: self.actor_encoder_dim.unwrap_or(encoder_dim),
            encoder_hidden: self.encoder_hidden,
            hidden: self.hidden.clone(),
            use_encoder: self.use_encoder,
        })
    }
}

/// Random streams used while collecting experience.
#[derive(Clone, Debug)]
pub struct RolloutRngs {
    pub context: Rng,
    pub reset: Rng,
    pub action: Rng,
}

impl RolloutRngs {
    pub fn derive(seed: u64, role: &str) -> Self {
        RolloutRngs {
            context: stream(seed, &format!("{role}/context"), 0),
            reset: stream(seed, &format!("{role}/reset"), 0),
            action: stream(seed, &format!("{role}/action"), 0),
        }
    }
}

/// Plays one full episode under `ctx` with stochastic actions.
pub fn run_episode(
    env: &mut dyn Environment,
    agent: &Agent,
    ctx: &Context,
    reset_rng: &mut Rng,
    action_rng: &mut Rng,
) -> Result<EpisodeRecord> {
    let mut obs = env.reset(ctx, reset_rng)?;
    let space = env.action_space();
    let mut prev = vec![0.0; agent.prev_action_dim()];
    let mut steps = Vec::with_capacity(env.horizon());
    loop {
        let (action, log_prob) = agent.act(&obs, ctx, &prev, action_rng)?;
        let step = env.step(&action)?;
        let encoded = action.encode(space);
        let done = step.done;
        let terminated = step.terminated;
        steps.push(StepRecord {
            obs: std::mem::replace(&mut obs, step.observation.clone()),
            action,
            prev_action: std::mem::replace(&mut prev, encoded),
            reward: step.reward,
            next_obs: step.observation,
            done,
            log_prob,
        });
        if done {
            return Ok(EpisodeRecord {
                context: ctx.clone(),
                steps,
                terminated,
            });
        }
    }
}

/// Collects whole episodes, each under a fresh context draw, until at least
/// `min_steps` transitions are stored.
pub fn collect_rollouts(
    env: &mut dyn Environment,
    agent: &Agent,
    contexts: &ContextSpec,
    min_steps: usize,
    rngs: &mut RolloutRngs,
) -> Result<RolloutBuffer> {
    let mut buf = RolloutBuffer::new();
    let mut steps = 0;
    while steps < min_steps {
        let ctx = sample_context(contexts, &mut rngs.context);
        let ep = run_episode(env, agent, &ctx, &mut rngs.reset, &mut rngs.action)?;
        steps += ep.steps.len();
        buf.push(ep);
    }
    Ok(buf)
}

/// Flattens a buffer into training rows with return targets; advantages are
/// left zero.
pub fn buffer_to_batch(buf: &RolloutBuffer, agent: &Agent, gamma: f64) -> Batch {
    let n = buf.total_steps();
    let obs_dim = agent.spec.obs_dim;
    let f_dim = agent.spec.factor_select.len();
    let a_dim = agent.prev_action_dim();
    let mut obs = Array2::zeros((n, obs_dim));
    let mut factors = Array2::zeros((n, f_dim));
    let mut prev = Array2::zeros((n, a_dim));
    let mut actions = Vec::with_capacity(n);
    let mut log_probs = Vec::with_capacity(n);
    let mut row = 0;
    for ep in &buf.episodes {
        let f = agent.select_factors(&ep.context);
        for s in &ep.steps {
            obs.row_mut(row).assign(&ndarray::aview1(&s.obs));
            factors.row_mut(row).assign(&ndarray::aview1(&f));
            prev.row_mut(row).assign(&ndarray::aview1(&s.prev_action));
            actions.push(s.action.clone());
            log_probs.push(s.log_prob);
            row += 1;
        }
    }
    Batch {
        obs,
        factors,
        prev_actions: prev,
        actions,
        log_probs,
        returns: buf.returns(gamma),
        advantages: vec![0.0; n],
    }
}

/// Raw (unstandardised) advantages for every row of `batch`.
pub fn compute_advantages(
    buf: &RolloutBuffer,
    batch: &Batch,
    agent: &Agent,
    gamma: f64,
    estimator: AdvantageEstimator,
) -> Result<Vec<f64>> {
    let values = agent.values_batch(batch.obs.view(), batch.factors.view())?;
    Ok(match estimator {
        AdvantageEstimator::MonteCarlo => batch.returns.iter().zip(&values).map(|(g, v)| g - v).collect(),
        AdvantageEstimator::Gae { lambda } => {
            let mut out = Vec::with_capacity(values.len());
            let mut off = 0;
            for ep in &buf.episodes {
                let n = ep.steps.len();
                let last = ep.steps.last().expect("non-empty episode");
                let bootstrap = if ep.terminated {
                    0.0
                } else {
                    agent.value(&last.next_obs, &ep.context)?
                };
                out.extend(gae(&ep.rewards(), &values[off..off + n], bootstrap, gamma, lambda));
                off += n;
            }
            out
        }
    })
}

/// Adam states for every trainable block of an agent.
#[derive(Clone, Debug)]
pub struct Optimizers {
    pub actor: Adam,
    pub log_std: Option<Adam>,
    pub critic: Adam,
    pub actor_encoder: Option<Adam>,
    pub critic_encoder: Option<Adam>,
}

impl Optimizers {
    pub fn new(agent: &Agent, cfg: &TrainConfig) -> Self {
        Optimizers {
            actor: Adam::new(&agent.actor, cfg.lr_actor),
            log_std: match &agent.head {
                PolicyHead::DiagonalGaussian(g) => Some(Adam::new(&g.log_std, cfg.lr_actor)),
                PolicyHead::Categorical { .. } => None,
            },
            critic: Adam::new(&agent.critic, cfg.lr_critic),
            actor_encoder: agent.actor_encoder.as_ref().map(|e| Adam::new(e, cfg.lr_encoder)),
            critic_encoder: agent.critic_encoder.as_ref().map(|e| Adam::new(e, cfg.lr_encoder)),
        }
    }

    /// Steps the actor, its log-std and whichever encoder feeds the actor.
    pub fn apply_actor(&mut self, agent: &mut Agent, g: &ActorGrads) -> Result<()> {
        self.actor.step(&mut agent.actor, &g.actor)?;
        if let (Some(opt), Some(d), PolicyHead::DiagonalGaussian(head)) =
            (self.log_std.as_mut(), g.log_std.as_ref(), &mut agent.head)
        {
            opt.step(&mut head.log_std, d)?;
        }
        if let Some(d) = &g.encoder {
            let shared = agent.variant().wiring().shared_encoder;
            let (opt, net) = if shared {
                (self.critic_encoder.as_mut(), agent.critic_encoder.as_mut())
            } else {
                (self.actor_encoder.as_mut(), agent.actor_encoder.as_mut())
            };
            match (opt, net) {
                (Some(o), Some(n)) => o.step(n, d)?,
                _ => return Err(Error::Usage("actor encoder gradient without an encoder".into())),
            }
        }
        Ok(())
    }

    pub fn apply_critic(&mut self, agent: &mut Agent, g: &CriticGrads) -> Result<()> {
        self.critic.step(&mut agent.critic, &g.critic)?;
        if let Some(d) = &g.encoder {
            match (self.critic_encoder.as_mut(), agent.critic_encoder.as_mut()) {
                (Some(o), Some(n)) => o.step(n, d)?,
                _ => return Err(Error::Usage("critic encoder gradient without an encoder".into())),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub env_steps: usize,
    pub batch_steps: usize,
    pub episodes: usize,
    pub mean_episode_return: f64,
    /// Mean ratio over the first gradient step of the phase (1 up to rounding).
    pub first_mean_ratio: f64,
    pub last_mean_ratio: f64,
    pub max_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub entropy: f64,
    pub actor_loss: f64,
    pub critic_loss_first: f64,
    pub critic_loss_last: f64,
}

/// Training state of one seed: agent, optimisers, environment and streams.
pub struct Trainer {
    pub agent: Agent,
    pub config: TrainConfig,
    pub optimizers: Optimizers,
    env: Box<dyn Environment>,
    contexts: ContextSpec,
    rollout_rngs: RolloutRngs,
    shuffle_rng: Rng,
    pub env_steps: usize,
    pub iteration: usize,
}

impl Trainer {
    /// `contexts` is the training distribution over environmental factors.
    pub fn new(
        env: Box<dyn Environment>,
        contexts: ContextSpec,
        variant: ArchVariant,
        config: TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        contexts.validate()?;
        if contexts.names() != env.context_spec().names() {
            return Err(Error::Config(format!(
                "context distribution factors {:?} do not match environment {:?}",
                contexts.names(),
                env.context_spec().names()
            )));
        }
        let spec = config.agent_spec(variant, env.as_ref())?;
        let mut init_rng = stream(seed, "init", 0);
        let agent = Agent::new(spec, &mut init_rng)?;
        let optimizers = Optimizers::new(&agent, &config);
        Ok(Trainer {
            agent,
            optimizers,
            env,
            contexts,
            rollout_rngs: RolloutRngs::derive(seed, "train"),
            shuffle_rng: stream(seed, "shuffle", 0),
            config,
            env_steps: 0,
            iteration: 0,
        })
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn contexts(&self) -> &ContextSpec {
        &self.contexts
    }

    pub fn collect(&mut self) -> Result<RolloutBuffer> {
        collect_rollouts(
            self.env.as_mut(),
            &self.agent,
            &self.contexts,
            self.config.batch_size,
            &mut self.rollout_rngs,
        )
    }

    /// Returns, advantages (standardised if configured) and rows for `buf`.
    pub fn prepare_batch(&self, buf: &RolloutBuffer) -> Result<Batch> {
        let mut batch = buffer_to_batch(buf, &self.agent, self.config.gamma);
        let mut adv = compute_advantages(buf, &batch, &self.agent, self.config.gamma, self.config.advantage)?;
        if self.config.standardize_advantages {
            standardize(&mut adv);
        }
        batch.advantages = adv;
        Ok(batch)
    }

    /// One actor gradient step on `batch`.
    pub fn update_actor(&mut self, batch: &Batch) -> Result<ActorStats> {
        let (stats, grads) = self
            .agent
            .actor_loss_and_grads(batch, self.config.clip, self.config.entropy_coef)?;
        if !stats.loss.is_finite() {
            return Err(Error::Numerical(format!("actor loss is {}", stats.loss)));
        }
        self.optimizers.apply_actor(&mut self.agent, &grads)?;
        Ok(stats)
    }

    /// One critic (and critic-encoder) gradient step on `batch`.
    pub fn update_critic(&mut self, batch: &Batch) -> Result<f64> {
        let (loss, grads) = self.agent.critic_loss_and_grads(batch)?;
        self.optimizers.apply_critic(&mut self.agent, &grads)?;
        Ok(loss)
    }

    /// Collect, estimate, then `epochs` rounds of actor and critic updates.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics> {
        let buf = self.collect()?;
        let batch = self.prepare_batch(&buf)?;
        self.env_steps += buf.total_steps();
        self.iteration += 1;

        let mut m = IterationMetrics {
            iteration: self.iteration,
            env_steps: self.env_steps,
            batch_steps: buf.total_steps(),
            episodes: buf.episodes.len(),
            mean_episode_return: buf.mean_episode_return(),
            first_mean_ratio: f64::NAN,
            ..Default::default()
        };

        let n = batch.len();
        let mb = if self.config.minibatch_size == 0 || self.config.minibatch_size >= n {
            n
        } else {
            self.config.minibatch_size
        };
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..self.config.epochs {
            let chunks: Vec<Vec<usize>> = if mb == n {
                vec![order.clone()]
            } else {
                order.shuffle(&mut self.shuffle_rng);
                order.chunks(mb).map(<[usize]>::to_vec).collect()
            };
            for (c, idx) in chunks.iter().enumerate() {
                let sub;
                let part = if mb == n {
                    &batch
                } else {
                    sub = batch.select(idx);
                    &sub
                };
                let stats = self.update_actor(part)?;
                let closs = self.update_critic(part)?;
                if epoch == 0 && c == 0 {
                    m.first_mean_ratio = stats.objective.mean_ratio;
                    m.critic_loss_first = closs;
                }
                m.last_mean_ratio = stats.objective.mean_ratio;
                m.max_ratio = stats.objective.max_ratio;
                m.clip_fraction = stats.objective.clip_fraction;
                m.approx_kl = stats.objective.approx_kl;
                m.entropy = stats.entropy;
                m.actor_loss = stats.loss;
                m.critic_loss_last = closs;
            }
        }
        Ok(m)
    }
}

/// Discounted return of a reward sequence from its first step.
pub fn episode_return(rewards: &[f64], gamma: f64) -> f64 {
    discounted_returns(rewards, gamma).first().copied().unwrap_or(0.0)
}
