//! Actor, critic and environmental-factor encoders for one architecture variant,
//! with batched loss gradients for the PPO update.

use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};

use super::loss::{actor_objective, value_loss, ActorObjective};
use super::variant::{assemble, segment_width, ArchVariant, Segment};
use crate::cmdp::{Action, ActionSpace, Context};
use crate::error::{Error, Result};
use crate::neural::checkpoint::Entry;
use crate::neural::{Categorical, Checkpoint, Init, Mlp, MlpCache, MlpGrads, Parameters, PolicyHead};
use crate::rng::Rng;

/// Shapes needed to build an [`Agent`].
#[derive(Clone, Debug, PartialEq)]
pub struct AgentSpec {
    pub variant: ArchVariant,
    pub env_id: String,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    /// Indices of the context factors the agent may consume.
    pub factor_select: Vec<usize>,
    /// Encoder output width (critic side; both sides when shared).
    pub encoder_dim: usize,
    /// Actor-side encoder output width for the hybrid variant.
    pub actor_encoder_dim: usize,
    pub encoder_hidden: usize,
    pub hidden: Vec<usize>,
    /// When false, encoder slots receive the raw factors instead.
    pub use_encoder: bool,
}

impl AgentSpec {
    fn factor_dim(&self) -> usize {
        self.factor_select.len()
    }

    fn actor_segments(&self) -> Vec<Segment> {
        self.variant.actor_segments(self.use_encoder)
    }

    fn critic_segments(&self) -> Vec<Segment> {
        self.variant.critic_segments(self.use_encoder)
    }

    fn actor_encoded_dim(&self) -> usize {
        if self.variant.wiring().shared_encoder {
            self.encoder_dim
        } else {
            self.actor_encoder_dim
        }
    }

    fn widths(&self, segs: &[Segment], encoded: usize, out: usize) -> Vec<usize> {
        let input: usize = segs
            .iter()
            .map(|&s| segment_width(s, self.obs_dim, self.factor_dim(), encoded, self.action_space.encoded_dim()))
            .sum();
        let mut w = vec![input];
        w.extend(&self.hidden);
        w.push(out);
        w
    }

    pub fn actor_widths(&self) -> Vec<usize> {
        self.widths(&self.actor_segments(), self.actor_encoded_dim(), self.action_space.head_dim())
    }

    pub fn critic_widths(&self) -> Vec<usize> {
        self.widths(&self.critic_segments(), self.encoder_dim, 1)
    }

    fn needs_actor_encoder(&self) -> bool {
        self.actor_segments().contains(&Segment::Encoded) && !self.variant.wiring().shared_encoder
    }

    fn needs_critic_encoder(&self) -> bool {
        self.critic_segments().contains(&Segment::Encoded)
    }

    fn encoder_widths(&self, out: usize) -> Vec<usize> {
        vec![self.factor_dim(), self.encoder_hidden, out]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub spec: AgentSpec,
    pub actor: Mlp,
    pub head: PolicyHead,
    pub critic: Mlp,
    /// Actor-only encoder (AACC-actor, AACC-hybrid).
    pub actor_encoder: Option<Mlp>,
    /// Critic encoder; also the actor's encoder when the variant shares one.
    pub critic_encoder: Option<Mlp>,
    actor_segments: Vec<Segment>,
    critic_segments: Vec<Segment>,
}

/// Rows of training data for the batched passes.
#[derive(Clone, Debug)]
pub struct Batch {
    pub obs: Array2<f64>,
    /// Selected factors, one row per step.
    pub factors: Array2<f64>,
    pub prev_actions: Array2<f64>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Row subset.
    pub fn select(&self, idx: &[usize]) -> Batch {
        let rows = |m: &Array2<f64>| m.select(ndarray::Axis(0), idx);
        Batch {
            obs: rows(&self.obs),
            factors: rows(&self.factors),
            prev_actions: rows(&self.prev_actions),
            actions: idx.iter().map(|&i| self.actions[i].clone()).collect(),
            log_probs: idx.iter().map(|&i| self.log_probs[i]).collect(),
            returns: idx.iter().map(|&i| self.returns[i]).collect(),
            advantages: idx.iter().map(|&i| self.advantages[i]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorGrads {
    pub actor: MlpGrads,
    pub log_std: Option<Vec<f64>>,
    /// Gradient for whichever encoder feeds the actor, if any.
    pub encoder: Option<MlpGrads>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticGrads {
    pub critic: MlpGrads,
    pub encoder: Option<MlpGrads>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorStats {
    pub objective: ActorObjective,
    pub entropy: f64,
    /// Minimised loss: `-(objective + entropy_coef * entropy)`.
    pub loss: f64,
}

fn segment_range(segs: &[Segment], target: Segment, widths: impl Fn(Segment) -> usize) -> Option<Range<usize>> {
    let mut off = 0;
    for &s in segs {
        let w = widths(s);
        if s == target {
            return Some(off..off + w);
        }
        off += w;
    }
    None
}

impl Agent {
    pub fn new(spec: AgentSpec, rng: &mut Rng) -> Result<Self> {
        if spec.use_encoder
            && (spec.variant.wiring().actor_uses_encoder || spec.variant.wiring().critic_uses_encoder)
            && spec.factor_dim() == 0
        {
            return Err(Error::Config("encoder variants need at least one environmental factor".into()));
        }
        let actor = Mlp::new(&spec.actor_widths(), Init::POLICY, rng);
        let critic = Mlp::new(&spec.critic_widths(), Init::VALUE, rng);
        let critic_encoder = spec
            .needs_critic_encoder()
            .then(|| Mlp::new(&spec.encoder_widths(spec.encoder_dim), Init::ENCODER, rng));
        let actor_encoder = spec
            .needs_actor_encoder()
            .then(|| Mlp::new(&spec.encoder_widths(spec.actor_encoder_dim), Init::ENCODER, rng));
        Ok(Agent {
            actor_segments: spec.actor_segments(),
            critic_segments: spec.critic_segments(),
            head: PolicyHead::for_space(spec.action_space),
            actor,
            critic,
            actor_encoder,
            critic_encoder,
            spec,
        })
    }

    pub fn variant(&self) -> ArchVariant {
        self.spec.variant
    }

    /// Encoder feeding the actor (the shared one for RMA variants).
    pub fn actor_side_encoder(&self) -> Option<&Mlp> {
        if self.spec.variant.wiring().shared_encoder {
            self.critic_encoder.as_ref()
        } else {
            self.actor_encoder.as_ref()
        }
    }

    pub fn select_factors(&self, ctx: &Context) -> Vec<f64> {
        self.spec.factor_select.iter().map(|&i| ctx.values()[i]).collect()
    }

    fn width_of(&self, seg: Segment, encoded: usize) -> usize {
        segment_width(
            seg,
            self.spec.obs_dim,
            self.spec.factor_dim(),
            encoded,
            self.spec.action_space.encoded_dim(),
        )
    }

    fn encode_one(&self, segs: &[Segment], enc: Option<&Mlp>, factors: &[f64]) -> Result<Option<Vec<f64>>> {
        if !segs.contains(&Segment::Encoded) {
            return Ok(None);
        }
        let enc = enc.ok_or_else(|| Error::Config("variant requires an encoder".into()))?;
        Ok(Some(enc.forward(factors)?))
    }

    pub fn actor_input(&self, obs: &[f64], ctx: &Context, prev_action: &[f64]) -> Result<Vec<f64>> {
        let f = self.select_factors(ctx);
        let encoded = self.encode_one(&self.actor_segments, self.actor_side_encoder(), &f)?;
        assemble(&self.actor_segments, obs, &f, encoded.as_deref(), Some(prev_action))
    }

    pub fn critic_input(&self, obs: &[f64], ctx: &Context) -> Result<Vec<f64>> {
        let f = self.select_factors(ctx);
        let encoded = self.encode_one(&self.critic_segments, self.critic_encoder.as_ref(), &f)?;
        assemble(&self.critic_segments, obs, &f, encoded.as_deref(), None)
    }

    /// Raw actor output (logits or Gaussian mean).
    pub fn actor_output(&self, obs: &[f64], ctx: &Context, prev_action: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(&self.actor_input(obs, ctx, prev_action)?)
    }

    pub fn act(&self, obs: &[f64], ctx: &Context, prev_action: &[f64], rng: &mut Rng) -> Result<(Action, f64)> {
        let out = self.actor_output(obs, ctx, prev_action)?;
        self.head.sample(&out, rng)
    }

    pub fn log_prob(&self, obs: &[f64], ctx: &Context, prev_action: &[f64], action: &Action) -> Result<f64> {
        let out = self.actor_output(obs, ctx, prev_action)?;
        self.head.log_prob(&out, action)
    }

    pub fn value(&self, obs: &[f64], ctx: &Context) -> Result<f64> {
        Ok(self.critic.forward(&self.critic_input(obs, ctx)?)?[0])
    }

    pub fn prev_action_dim(&self) -> usize {
        self.spec.action_space.encoded_dim()
    }

    fn assemble_batch(
        &self,
        segs: &[Segment],
        encoded: Option<&Array2<f64>>,
        obs: ArrayView2<f64>,
        factors: ArrayView2<f64>,
        prev: ArrayView2<f64>,
    ) -> Array2<f64> {
        let enc_w = encoded.map_or(0, |e| e.ncols());
        let total: usize = segs.iter().map(|&s| self.width_of(s, enc_w)).sum();
        let mut x = Array2::zeros((obs.nrows(), total));
        let mut off = 0;
        for &seg in segs {
            let w = self.width_of(seg, enc_w);
            let src = match seg {
                Segment::Observation => obs.view(),
                Segment::Factors => factors.view(),
                Segment::PrevAction => prev.view(),
                Segment::Encoded => encoded.expect("encoder output present").view(),
            };
            x.slice_mut(s![.., off..off + w]).assign(&src);
            off += w;
        }
        x
    }

    /// Critic values for a batch of rows.
    pub fn values_batch(&self, obs: ArrayView2<f64>, factors: ArrayView2<f64>) -> Result<Vec<f64>> {
        let encoded = match (&self.critic_encoder, self.critic_segments.contains(&Segment::Encoded)) {
            (Some(enc), true) => Some(enc.forward_batch(factors)?.output().clone()),
            _ => None,
        };
        let dummy = Array2::zeros((obs.nrows(), 0));
        let x = self.assemble_batch(&self.critic_segments, encoded.as_ref(), obs, factors, dummy.view());
        Ok(self.critic.forward_batch(x.view())?.output().column(0).to_vec())
    }

    /// Clipped-surrogate statistics and gradients of the minimised actor loss.
    pub fn actor_loss_and_grads(&self, batch: &Batch, clip: f64, entropy_coef: f64) -> Result<(ActorStats, ActorGrads)> {
        let enc = if self.actor_segments.contains(&Segment::Encoded) {
            self.actor_side_encoder()
        } else {
            None
        };
        let enc_cache: Option<MlpCache> = enc.map(|e| e.forward_batch(batch.factors.view())).transpose()?;
        let x = self.assemble_batch(
            &self.actor_segments,
            enc_cache.as_ref().map(|c| c.output()),
            batch.obs.view(),
            batch.factors.view(),
            batch.prev_actions.view(),
        );
        let cache = self.actor.forward_batch(x.view())?;
        let out = cache.output();
        let n = batch.len();
        let head_dim = out.ncols();

        let mut logp_new = Vec::with_capacity(n);
        for (i, a) in batch.actions.iter().enumerate() {
            let row = out.row(i);
            logp_new.push(self.head.log_prob(row.as_slice().expect("row-major"), a)?);
        }
        let obj = actor_objective(&logp_new, &batch.log_probs, &batch.advantages, clip);

        let inv = 1.0 / n.max(1) as f64;
        let mut d_out = Array2::<f64>::zeros((n, head_dim));
        let mut entropy = 0.0;
        let mut d_log_std = match &self.head {
            PolicyHead::DiagonalGaussian(g) => Some(vec![0.0; g.log_std.len()]),
            PolicyHead::Categorical { .. } => None,
        };
        let mut tmp = vec![0.0; head_dim];
        let mut tmp_std = vec![0.0; head_dim];
        for (i, a) in batch.actions.iter().enumerate() {
            let row = out.row(i);
            let row = row.as_slice().expect("row-major");
            // Loss = -(surrogate + c * entropy); dL/dlogp = -grad_log_prob.
            let coef = -obj.grad_log_prob[i];
            match (&self.head, a) {
                (PolicyHead::Categorical { .. }, Action::Discrete(k)) => {
                    Categorical::grad_log_prob(row, *k, &mut tmp);
                    entropy += Categorical::entropy(row);
                    let mut d = d_out.row_mut(i);
                    for j in 0..head_dim {
                        d[j] = coef * tmp[j];
                    }
                    if entropy_coef != 0.0 {
                        Categorical::grad_entropy(row, &mut tmp);
                        for j in 0..head_dim {
                            d[j] -= entropy_coef * inv * tmp[j];
                        }
                    }
                }
                (PolicyHead::DiagonalGaussian(g), Action::Continuous(act)) => {
                    g.grad_log_prob(row, act, &mut tmp, &mut tmp_std);
                    let mut d = d_out.row_mut(i);
                    for j in 0..head_dim {
                        d[j] = coef * tmp[j];
                    }
                    let ds = d_log_std.as_mut().expect("gaussian head");
                    for j in 0..head_dim {
                        ds[j] += coef * tmp_std[j];
                    }
                }
                _ => return Err(Error::Usage(format!("action {a:?} does not match policy head"))),
            }
        }
        if let PolicyHead::DiagonalGaussian(g) = &self.head {
            entropy = g.entropy() * n as f64;
            if let Some(ds) = d_log_std.as_mut() {
                // d entropy / d log_std = 1 per dimension.
                ds.iter_mut().for_each(|v| *v -= entropy_coef);
            }
        }
        entropy *= inv;

        let (actor_grads, d_x) = self.actor.backward(&cache, d_out.view());
        let encoder_grads = match (enc, enc_cache) {
            (Some(enc), Some(ec)) => {
                let range = segment_range(&self.actor_segments, Segment::Encoded, |s| {
                    self.width_of(s, ec.output().ncols())
                })
                .expect("encoded segment");
                let d_enc = d_x.slice(s![.., range]).to_owned();
                Some(enc.backward(&ec, d_enc.view()).0)
            }
            _ => None,
        };
        let loss = -(obj.value + entropy_coef * entropy);
        Ok((
            ActorStats {
                objective: obj,
                entropy,
                loss,
            },
            ActorGrads {
                actor: actor_grads,
                log_std: d_log_std,
                encoder: encoder_grads,
            },
        ))
    }

    /// Squared-error critic loss against `batch.returns` and its gradients,
    /// flowing through the critic's input into the critic encoder.
    pub fn critic_loss_and_grads(&self, batch: &Batch) -> Result<(f64, CriticGrads)> {
        let enc = if self.critic_segments.contains(&Segment::Encoded) {
            self.critic_encoder.as_ref()
        } else {
            None
        };
        let enc_cache = enc.map(|e| e.forward_batch(batch.factors.view())).transpose()?;
        let dummy = Array2::zeros((batch.len(), 0));
        let x = self.assemble_batch(
            &self.critic_segments,
            enc_cache.as_ref().map(|c| c.output()),
            batch.obs.view(),
            batch.factors.view(),
            dummy.view(),
        );
        let cache = self.critic.forward_batch(x.view())?;
        let pred: Vec<f64> = cache.output().column(0).to_vec();
        let (loss, d_pred) = value_loss(&pred, &batch.returns);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("critic loss is {loss}")));
        }
        let d_out = Array2::from_shape_vec((batch.len(), 1), d_pred).expect("column shape");
        let (critic_grads, d_x) = self.critic.backward(&cache, d_out.view());
        let encoder_grads = match (enc, enc_cache) {
            (Some(enc), Some(ec)) => {
                let range = segment_range(&self.critic_segments, Segment::Encoded, |s| {
                    self.width_of(s, ec.output().ncols())
                })
                .expect("encoded segment");
                let d_enc = d_x.slice(s![.., range]).to_owned();
                Some(enc.backward(&ec, d_enc.view()).0)
            }
            _ => None,
        };
        Ok((
            loss,
            CriticGrads {
                critic: critic_grads,
                encoder: encoder_grads,
            },
        ))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut entries = vec![
            Entry::Net {
                name: "actor".into(),
                widths: self.actor.widths(),
            },
            Entry::Net {
                name: "critic".into(),
                widths: self.critic.widths(),
            },
        ];
        let mut params = self.actor.to_flat();
        params.extend(self.critic.to_flat());
        if let Some(e) = &self.actor_encoder {
            entries.push(Entry::Net {
                name: "actor_encoder".into(),
                widths: e.widths(),
            });
            params.extend(e.to_flat());
        }
        if let Some(e) = &self.critic_encoder {
            entries.push(Entry::Net {
                name: "critic_encoder".into(),
                widths: e.widths(),
            });
            params.extend(e.to_flat());
        }
        if let PolicyHead::DiagonalGaussian(g) = &self.head {
            entries.push(Entry::Vector {
                name: "log_std".into(),
                len: g.log_std.len(),
            });
            params.extend(&g.log_std);
        }
        Checkpoint {
            variant: self.spec.variant.name().to_string(),
            env: self.spec.env_id.clone(),
            entries,
            params,
        }
    }

    /// Rebuilds an agent for `spec` and loads the checkpoint's parameters. Every
    /// network's widths must match what the spec implies.
    pub fn from_checkpoint(spec: AgentSpec, ck: &Checkpoint) -> Result<Self> {
        if ck.variant != spec.variant.name() || ck.env != spec.env_id {
            return Err(Error::Config(format!(
                "checkpoint is for {}/{}, config asks for {}/{}",
                ck.env, ck.variant, spec.env_id, spec.variant
            )));
        }
        let mut rng = crate::rng::from_seed(0);
        let mut agent = Agent::new(spec, &mut rng)?;
        let load = |name: &str, net: &mut Mlp| -> Result<()> {
            let (entry, values) = ck
                .slice(name)
                .ok_or_else(|| Error::parse("checkpoint", format!("missing network `{name}`")))?;
            match entry {
                Entry::Net { widths, .. } if *widths == net.widths() => net.load_flat(values),
                _ => Err(Error::parse(
                    "checkpoint",
                    format!("network `{name}` has shape {entry:?}, expected {:?}", net.widths()),
                )),
            }
        };
        load("actor", &mut agent.actor)?;
        load("critic", &mut agent.critic)?;
        if let Some(e) = agent.actor_encoder.as_mut() {
            load("actor_encoder", e)?;
        }
        if let Some(e) = agent.critic_encoder.as_mut() {
            load("critic_encoder", e)?;
        }
        if let PolicyHead::DiagonalGaussian(g) = &mut agent.head {
            let (_, values) = ck
                .slice("log_std")
                .ok_or_else(|| Error::parse("checkpoint", "missing log_std"))?;
            g.log_std.load_flat(values)?;
        }
        let expected = agent.to_checkpoint();
        if expected.entries.len() != ck.entries.len() {
            return Err(Error::parse("checkpoint", "unexpected extra networks"));
        }
        Ok(agent)
    }

    /// Hash over every trainable parameter.
    pub fn fingerprint(&self) -> u64 {
        let ck = self.to_checkpoint();
        ck.params.fingerprint()
    }
}
