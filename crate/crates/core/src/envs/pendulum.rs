//! Torque-limited pendulum swing-up with contextual time step, gravity, length
//! and mass. Angle 0 is upright.

use std::f64::consts::PI;

use rand::Rng as _;

use super::{wrap_angle, Dynamics, Transition};
use crate::cmdp::{Action, ActionSpace, Context, ContextSpec, DistSpec, FactorSpec};
use crate::rng::Rng;

pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumState {
    pub angle: f64,
    pub angular_velocity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumParams {
    pub dt: f64,
    pub g: f64,
    pub l: f64,
    pub m: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            dt: 0.05,
            g: 10.0,
            l: 1.0,
            m: 1.0,
        }
    }
}

/// Returns the next state and the step reward.
pub fn pendulum_dynamics(s: &PendulumState, torque: f64, p: &PendulumParams) -> (PendulumState, f64) {
    let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
    let th = s.angle;
    let thdot = s.angular_velocity;
    let cost = wrap_angle(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;
    let new_thdot = (thdot
        + (3.0 * p.g / (2.0 * p.l) * th.sin() + 3.0 / (p.m * p.l * p.l) * u) * p.dt)
        .clamp(-MAX_SPEED, MAX_SPEED);
    let next = PendulumState {
        angle: th + new_thdot * p.dt,
        angular_velocity: new_thdot,
    };
    (next, -cost)
}

#[derive(Clone, Debug, Default)]
pub struct Pendulum;

impl Dynamics for Pendulum {
    type State = PendulumState;
    type Params = PendulumParams;

    const ID: &'static str = "pendulum";

    fn context_spec() -> ContextSpec {
        let g = DistSpec::GaussianMultiplicative { std: 0.1 };
        let inf = f64::INFINITY;
        ContextSpec::new(vec![
            FactorSpec::new("dt", 0.05, (0.0, inf), g.clone()),
            FactorSpec::new("g", 10.0, (0.0, inf), g.clone()),
            FactorSpec::new("l", 1.0, (1e-6, inf), g.clone()),
            FactorSpec::new("m", 1.0, (1e-6, inf), g),
        ])
        .expect("static pendulum spec")
    }

    fn observation_dim() -> usize {
        3
    }

    fn action_space() -> ActionSpace {
        ActionSpace::Continuous {
            dim: 1,
            bound: MAX_TORQUE,
        }
    }

    fn horizon() -> usize {
        200
    }

    fn params(ctx: &Context) -> PendulumParams {
        let v = ctx.values();
        PendulumParams {
            dt: v[0],
            g: v[1],
            l: v[2],
            m: v[3],
        }
    }

    fn initial_state(rng: &mut Rng) -> PendulumState {
        PendulumState {
            angle: rng.gen_range(-PI..PI),
            angular_velocity: rng.gen_range(-1.0..1.0),
        }
    }

    fn observe(s: &PendulumState) -> Vec<f64> {
        vec![s.angle.cos(), s.angle.sin(), s.angular_velocity]
    }

    fn transition(s: &PendulumState, action: &Action, p: &PendulumParams) -> Transition<PendulumState> {
        let torque = match action {
            Action::Continuous(a) => a[0],
            Action::Discrete(_) => 0.0,
        };
        let (next, reward) = pendulum_dynamics(s, torque, p);
        Transition {
            next,
            reward,
            terminal: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_rest_is_the_goal() {
        let s = PendulumState {
            angle: 0.0,
            angular_velocity: 0.0,
        };
        let (n, r) = pendulum_dynamics(&s, 0.0, &PendulumParams::default());
        assert_eq!(r, 0.0);
        assert_eq!(n, s);
    }

    #[test]
    fn zero_gravity_has_no_restoring_force() {
        let p = PendulumParams {
            g: 0.0,
            ..PendulumParams::default()
        };
        for angle in [-3.0, -1.0, 0.4, 2.5] {
            let s = PendulumState {
                angle,
                angular_velocity: 0.0,
            };
            assert_eq!(pendulum_dynamics(&s, 0.0, &p).0.angular_velocity, 0.0);
        }
    }

    #[test]
    fn quarter_turn_unit_torque_matches_hand_update() {
        let th = PI / 4.0;
        let (g, l, m, dt) = (10.0_f64, 1.0_f64, 1.0_f64, 0.05_f64);
        let w = (3.0 * g / (2.0 * l) * th.sin() + 3.0 / (m * l * l) * 1.0) * dt;
        let expect_angle = th + w * dt;
        let expect_reward = -(th * th + 0.001);
        let (n, r) = pendulum_dynamics(
            &PendulumState {
                angle: th,
                angular_velocity: 0.0,
            },
            1.0,
            &PendulumParams::default(),
        );
        assert!((n.angular_velocity - w).abs() < 1e-15);
        assert!((n.angle - expect_angle).abs() < 1e-15);
        assert!((r - expect_reward).abs() < 1e-15);
        // 15 * sin(pi/4) + 3 = 13.6066..., times dt.
        assert!((n.angular_velocity - 0.680_330_085_889_910_6).abs() < 1e-12);
    }

    #[test]
    fn torque_is_clipped() {
        let s = PendulumState {
            angle: 1.0,
            angular_velocity: 0.0,
        };
        let p = PendulumParams::default();
        assert_eq!(pendulum_dynamics(&s, 50.0, &p), pendulum_dynamics(&s, 2.0, &p));
    }

    #[test]
    fn gravity_changes_next_observation() {
        let s = PendulumState {
            angle: 0.7,
            angular_velocity: 0.0,
        };
        let lo = PendulumParams {
            g: 9.0,
            ..PendulumParams::default()
        };
        assert_ne!(
            pendulum_dynamics(&s, 0.0, &lo).0,
            pendulum_dynamics(&s, 0.0, &PendulumParams::default()).0
        );
    }
}
