//! Finite-difference checks of the agent's actor and critic losses.

use super::agent::{Agent, Batch};
use crate::error::Result;
use crate::neural::gradcheck::{max_relative_error, net_differences, GradCheck};
use crate::neural::{Mlp, Parameters, PolicyHead};

fn with_net(agent: &Agent, which: &str, net: &Mlp) -> Agent {
    let mut a = agent.clone();
    let slot = match which {
        "actor" => &mut a.actor,
        "critic" => &mut a.critic,
        "actor_encoder" => a.actor_encoder.as_mut().expect("actor encoder"),
        _ => a.critic_encoder.as_mut().expect("critic encoder"),
    };
    *slot = net.clone();
    a
}

fn actor_side_encoder_name(agent: &Agent) -> &'static str {
    if agent.variant().wiring().shared_encoder {
        "critic_encoder"
    } else {
        "actor_encoder"
    }
}

/// Checks every gradient the two losses produce against central differences.
pub fn agent_loss_checks(agent: &Agent, batch: &Batch, clip: f64, entropy_coef: f64, h: f64) -> Result<Vec<GradCheck>> {
    let tag = agent.variant().name();
    let actor_loss = |a: &Agent| Ok(a.actor_loss_and_grads(batch, clip, entropy_coef)?.0.loss);
    let critic_loss = |a: &Agent| Ok(a.critic_loss_and_grads(batch)?.0);
    let (stats, ag) = agent.actor_loss_and_grads(batch, clip, entropy_coef)?;
    let (closs, cg) = agent.critic_loss_and_grads(batch)?;
    let mut checks = Vec::new();
    let mut push = |name: String, analytic: Vec<f64>, numeric: Vec<f64>, loss: f64| {
        checks.push(GradCheck {
            name,
            params: numeric.len(),
            max_rel_error: max_relative_error(&analytic, &numeric, loss),
        })
    };

    let n = net_differences(&agent.actor, h, |m| actor_loss(&with_net(agent, "actor", m)))?;
    push(format!("{tag}/actor"), ag.actor.to_flat(), n, stats.loss);

    if let (Some(g), PolicyHead::DiagonalGaussian(head)) = (&ag.log_std, &agent.head) {
        let mut probe = agent.clone();
        let mut flat = head.log_std.clone();
        let n = crate::neural::gradcheck::central_differences(&mut flat, h, |p| {
            if let PolicyHead::DiagonalGaussian(g) = &mut probe.head {
                g.log_std.copy_from_slice(p);
            }
            actor_loss(&probe)
        })?;
        push(format!("{tag}/log_std"), g.clone(), n, stats.loss);
    }

    if let (Some(g), Some(enc)) = (&ag.encoder, agent.actor_side_encoder()) {
        let which = actor_side_encoder_name(agent);
        let n = net_differences(enc, h, |m| actor_loss(&with_net(agent, which, m)))?;
        push(format!("{tag}/actor_loss/encoder"), g.to_flat(), n, stats.loss);
    }

    let n = net_differences(&agent.critic, h, |m| critic_loss(&with_net(agent, "critic", m)))?;
    push(format!("{tag}/critic"), cg.critic.to_flat(), n, closs);

    if let (Some(g), Some(enc)) = (&cg.encoder, &agent.critic_encoder) {
        let n = net_differences(enc, h, |m| critic_loss(&with_net(agent, "critic_encoder", m)))?;
        push(format!("{tag}/critic_loss/encoder"), g.to_flat(), n, closs);
    }
    Ok(checks)
}
