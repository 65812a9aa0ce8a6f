//! Architecture variants: how observation, raw factors, encoded factors and the
//! previous action are wired into the actor and the critic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::Mlp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchVariant {
    /// Context-blind actor, critic on `(mu(e), o)`.
    Aacc,
    /// Nobody sees the factors.
    Robust,
    /// Both networks see the raw factors.
    #[serde(rename = "sysid")]
    SysId,
    /// Shared encoder on both sides, actor also gets the previous action.
    Rma,
    RmaNormal,
    /// Encoder on the actor side only.
    AaccActor,
    /// Separate encoders for actor and critic.
    AaccHybrid,
}

pub const ALL_VARIANTS: [ArchVariant; 7] = [
    ArchVariant::Aacc,
    ArchVariant::Robust,
    ArchVariant::SysId,
    ArchVariant::Rma,
    ArchVariant::RmaNormal,
    ArchVariant::AaccActor,
    ArchVariant::AaccHybrid,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wiring {
    pub actor_sees_factors: bool,
    pub actor_uses_encoder: bool,
    pub critic_sees_factors: bool,
    pub critic_uses_encoder: bool,
    pub actor_sees_prev_action: bool,
    pub shared_encoder: bool,
}

impl ArchVariant {
    pub fn wiring(self) -> Wiring {
        let w = |asf, aue, csf, cue, prev, shared| Wiring {
            actor_sees_factors: asf,
            actor_uses_encoder: aue,
            critic_sees_factors: csf,
            critic_uses_encoder: cue,
            actor_sees_prev_action: prev,
            shared_encoder: shared,
        };
        match self {
            ArchVariant::Aacc => w(false, false, true, true, false, false),
            ArchVariant::Robust => w(false, false, false, false, false, false),
            ArchVariant::SysId => w(true, false, true, false, false, false),
            ArchVariant::Rma => w(true, true, true, true, true, true),
            ArchVariant::RmaNormal => w(true, true, true, true, false, true),
            ArchVariant::AaccActor => w(true, true, false, false, false, false),
            ArchVariant::AaccHybrid => w(true, true, true, true, false, false),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArchVariant::Aacc => "aacc",
            ArchVariant::Robust => "robust",
            ArchVariant::SysId => "sysid",
            ArchVariant::Rma => "rma",
            ArchVariant::RmaNormal => "rma_normal",
            ArchVariant::AaccActor => "aacc_actor",
            ArchVariant::AaccHybrid => "aacc_hybrid",
        }
    }

    /// Input blocks of the actor, in concatenation order.
    pub fn actor_segments(self, use_encoder: bool) -> Vec<Segment> {
        let enc = encoded_or_raw(use_encoder);
        match self {
            ArchVariant::Aacc | ArchVariant::Robust => vec![Segment::Observation],
            ArchVariant::SysId => vec![Segment::Observation, Segment::Factors],
            ArchVariant::Rma => vec![Segment::Observation, Segment::PrevAction, enc],
            ArchVariant::RmaNormal | ArchVariant::AaccActor | ArchVariant::AaccHybrid => {
                vec![Segment::Observation, enc]
            }
        }
    }

    /// Input blocks of the critic, in concatenation order.
    pub fn critic_segments(self, use_encoder: bool) -> Vec<Segment> {
        match self {
            ArchVariant::Robust | ArchVariant::AaccActor => vec![Segment::Observation],
            ArchVariant::SysId => vec![Segment::Observation, Segment::Factors],
            ArchVariant::Aacc | ArchVariant::Rma | ArchVariant::RmaNormal | ArchVariant::AaccHybrid => {
                vec![encoded_or_raw(use_encoder), Segment::Observation]
            }
        }
    }
}

fn encoded_or_raw(use_encoder: bool) -> Segment {
    if use_encoder {
        Segment::Encoded
    } else {
        Segment::Factors
    }
}

impl fmt::Display for ArchVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_VARIANTS
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| Error::Config(format!("unknown architecture variant `{s}`")))
    }
}

/// One block of a network input vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    Observation,
    /// Raw environmental factors `e`.
    Factors,
    /// Encoder output `mu(e)`.
    Encoded,
    /// Previous action (one-hot for discrete spaces), zeros at `t = 0`.
    PrevAction,
}

/// Concatenates the requested blocks. A block the caller did not supply is a
/// configuration error.
pub fn assemble(
    segments: &[Segment],
    obs: &[f64],
    factors: &[f64],
    encoded: Option<&[f64]>,
    prev_action: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for seg in segments {
        match seg {
            Segment::Observation => out.extend_from_slice(obs),
            Segment::Factors => out.extend_from_slice(factors),
            Segment::Encoded => out.extend_from_slice(
                encoded.ok_or_else(|| Error::Config("variant requires an encoder".into()))?,
            ),
            Segment::PrevAction => out.extend_from_slice(
                prev_action
                    .ok_or_else(|| Error::Config("variant requires the previous action".into()))?,
            ),
        }
    }
    Ok(out)
}

/// Actor input for one step. `encoder` is the actor-side encoder (the shared
/// one for RMA variants).
pub fn build_actor_input(
    variant: ArchVariant,
    obs: &[f64],
    factors: &[f64],
    prev_action: Option<&[f64]>,
    encoder: Option<&Mlp>,
) -> Result<Vec<f64>> {
    let segs = variant.actor_segments(true);
    let encoded = encode_if_needed(&segs, factors, encoder)?;
    assemble(&segs, obs, factors, encoded.as_deref(), prev_action)
}

/// Critic input for one step.
pub fn build_critic_input(
    variant: ArchVariant,
    obs: &[f64],
    factors: &[f64],
    encoder: Option<&Mlp>,
) -> Result<Vec<f64>> {
    let segs = variant.critic_segments(true);
    let encoded = encode_if_needed(&segs, factors, encoder)?;
    assemble(&segs, obs, factors, encoded.as_deref(), None)
}

fn encode_if_needed(segs: &[Segment], factors: &[f64], encoder: Option<&Mlp>) -> Result<Option<Vec<f64>>> {
    if segs.contains(&Segment::Encoded) {
        let enc = encoder.ok_or_else(|| Error::Config("variant requires an encoder".into()))?;
        Ok(Some(enc.forward(factors)?))
    } else {
        Ok(None)
    }
}

pub fn segment_width(seg: Segment, obs: usize, factors: usize, encoded: usize, action: usize) -> usize {
    match seg {
        Segment::Observation => obs,
        Segment::Factors => factors,
        Segment::Encoded => encoded,
        Segment::PrevAction => action,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Init, Mlp};
    use crate::rng::from_seed;

    #[test]
    fn wiring_invariants() {
        let w = ArchVariant::Aacc.wiring();
        assert!(w.critic_uses_encoder && !w.actor_sees_factors);
        let w = ArchVariant::Robust.wiring();
        assert!(!w.actor_sees_factors && !w.critic_sees_factors);
        let w = ArchVariant::SysId.wiring();
        assert!(w.actor_sees_factors && w.critic_sees_factors && !w.actor_uses_encoder && !w.critic_uses_encoder);
        let w = ArchVariant::Rma.wiring();
        assert!(w.actor_uses_encoder && w.critic_uses_encoder && w.actor_sees_prev_action);
        let w = ArchVariant::RmaNormal.wiring();
        assert!(w.actor_uses_encoder && !w.actor_sees_prev_action);
        let w = ArchVariant::AaccActor.wiring();
        assert!(w.actor_uses_encoder && !w.critic_uses_encoder);
        let w = ArchVariant::AaccHybrid.wiring();
        assert!(w.actor_uses_encoder && w.critic_uses_encoder && !w.shared_encoder);
        for v in ALL_VARIANTS {
            let w = v.wiring();
            let actor = v.actor_segments(true);
            assert_eq!(actor.contains(&Segment::Encoded), w.actor_uses_encoder, "{v}");
            assert_eq!(actor.contains(&Segment::PrevAction), w.actor_sees_prev_action, "{v}");
            assert_eq!(
                actor.contains(&Segment::Encoded) || actor.contains(&Segment::Factors),
                w.actor_sees_factors,
                "{v}"
            );
            let critic = v.critic_segments(true);
            assert_eq!(critic.contains(&Segment::Encoded), w.critic_uses_encoder, "{v}");
        }
    }

    #[test]
    fn names_roundtrip() {
        for v in ALL_VARIANTS {
            assert_eq!(v.name().parse::<ArchVariant>().unwrap(), v);
        }
        assert_eq!("RMA-normal".parse::<ArchVariant>().unwrap(), ArchVariant::RmaNormal);
        assert!("ppo".parse::<ArchVariant>().is_err());
    }

    #[test]
    fn aacc_actor_input_is_the_observation() {
        let obs = [0.1, -0.2, 0.3, 0.4];
        let e = [10.0, 9.8, 1.0, 0.1, 0.5, 0.02];
        let x = build_actor_input(ArchVariant::Aacc, &obs, &e, None, None).unwrap();
        assert_eq!(x, obs.to_vec());
    }

    #[test]
    fn sysid_concatenates_observation_then_factors() {
        let obs = [1.0, 2.0, 3.0, 4.0];
        let e = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let x = build_actor_input(ArchVariant::SysId, &obs, &e, None, None).unwrap();
        assert_eq!(x.len(), 10);
        assert_eq!(x, (1..=10).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn rma_cartpole_actor_input_width() {
        let mut rng = from_seed(0);
        let enc = Mlp::new(&[6, 32, 3], Init::ENCODER, &mut rng);
        let prev = [0.0, 1.0];
        let x = build_actor_input(ArchVariant::Rma, &[0.0; 4], &[1.0; 6], Some(&prev), Some(&enc)).unwrap();
        assert_eq!(x.len(), 9);
        assert_eq!(&x[4..6], &prev);
        assert!(build_actor_input(ArchVariant::Rma, &[0.0; 4], &[1.0; 6], None, Some(&enc)).is_err());
        assert!(build_actor_input(ArchVariant::RmaNormal, &[0.0; 4], &[1.0; 6], None, None).is_err());
    }

    #[test]
    fn critic_inputs() {
        let mut rng = from_seed(1);
        let enc = Mlp::new(&[4, 32, 2], Init::ENCODER, &mut rng);
        let obs = [0.5, -0.5, 0.25];
        let x = build_critic_input(ArchVariant::Aacc, &obs, &[1.0; 4], Some(&enc)).unwrap();
        assert_eq!(x.len(), 5);
        assert_eq!(&x[2..], &obs);
        let x = build_critic_input(ArchVariant::Robust, &obs, &[1.0; 4], None).unwrap();
        assert_eq!(x, obs.to_vec());
        let zero = Mlp::zeros(&[4, 32, 2]);
        let x = build_critic_input(ArchVariant::Aacc, &obs, &[3.0, 1.0, 2.0, 7.0], Some(&zero)).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 0.5, -0.5, 0.25]);
        assert!(build_critic_input(ArchVariant::Aacc, &obs, &[1.0; 4], None).is_err());
    }
}
