//! Cart-pole balancing with contextual gravity, masses, pole length, force
//! magnitude and integration step.

use rand::Rng as _;

use super::{Dynamics, Transition};
use crate::cmdp::{Action, ActionSpace, Context, ContextSpec, DistSpec, FactorSpec};
use crate::rng::Rng;

pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPoleState {
    pub cart_position: f64,
    pub cart_velocity: f64,
    pub pole_angle: f64,
    pub pole_angular_velocity: f64,
}

impl CartPoleState {
    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        CartPoleState {
            cart_position: x,
            cart_velocity: x_dot,
            pole_angle: theta,
            pole_angular_velocity: theta_dot,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartPoleParams {
    pub force_magnifier: f64,
    pub gravity: f64,
    pub masscart: f64,
    pub masspole: f64,
    /// Half the pole length, as in the classic formulation.
    pub pole_length: f64,
    pub update_interval: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            force_magnifier: 10.0,
            gravity: 9.8,
            masscart: 1.0,
            masspole: 0.1,
            pole_length: 0.5,
            update_interval: 0.02,
        }
    }
}

/// One Euler step of the cart-pole equations under a signed force.
pub fn cartpole_dynamics(s: &CartPoleState, force: f64, p: &CartPoleParams) -> CartPoleState {
    let total_mass = p.masspole + p.masscart;
    let polemass_length = p.masspole * p.pole_length;
    let (sin_t, cos_t) = s.pole_angle.sin_cos();
    let temp =
        (force + polemass_length * s.pole_angular_velocity.powi(2) * sin_t) / total_mass;
    let theta_acc = (p.gravity * sin_t - cos_t * temp)
        / (p.pole_length * (4.0 / 3.0 - p.masspole * cos_t * cos_t / total_mass));
    let x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
    let tau = p.update_interval;
    CartPoleState {
        cart_position: s.cart_position + tau * s.cart_velocity,
        cart_velocity: s.cart_velocity + tau * x_acc,
        pole_angle: s.pole_angle + tau * s.pole_angular_velocity,
        pole_angular_velocity: s.pole_angular_velocity + tau * theta_acc,
    }
}

pub fn is_terminal(s: &CartPoleState) -> bool {
    s.cart_position.abs() > X_THRESHOLD || s.pole_angle.abs() > THETA_THRESHOLD
}

#[derive(Clone, Debug, Default)]
pub struct CartPole;

impl Dynamics for CartPole {
    type State = CartPoleState;
    type Params = CartPoleParams;

    const ID: &'static str = "cartpole";

    fn context_spec() -> ContextSpec {
        let g = DistSpec::GaussianMultiplicative { std: 0.5 };
        ContextSpec::new(vec![
            FactorSpec::new("force_magnifier", 10.0, (1.0, 100.0), g.clone()).integer(),
            FactorSpec::new("gravity", 9.8, (0.1, f64::INFINITY), g.clone()),
            FactorSpec::new("masscart", 1.0, (0.1, 10.0), g.clone()),
            FactorSpec::new("masspole", 0.1, (0.01, 1.0), g.clone()),
            FactorSpec::new("pole_length", 0.5, (0.05, 5.0), g.clone()),
            FactorSpec::new("update_interval", 0.02, (0.002, 0.2), g),
        ])
        .expect("static cartpole spec")
    }

    fn observation_dim() -> usize {
        4
    }

    fn action_space() -> ActionSpace {
        ActionSpace::Discrete(2)
    }

    fn horizon() -> usize {
        500
    }

    fn params(ctx: &Context) -> CartPoleParams {
        let v = ctx.values();
        CartPoleParams {
            force_magnifier: v[0],
            gravity: v[1],
            masscart: v[2],
            masspole: v[3],
            pole_length: v[4],
            update_interval: v[5],
        }
    }

    fn initial_state(rng: &mut Rng) -> CartPoleState {
        let mut u = || rng.gen_range(-0.05..0.05);
        CartPoleState::new(u(), u(), u(), u())
    }

    fn observe(s: &CartPoleState) -> Vec<f64> {
        vec![
            s.cart_position,
            s.cart_velocity,
            s.pole_angle,
            s.pole_angular_velocity,
        ]
    }

    fn transition(s: &CartPoleState, action: &Action, p: &CartPoleParams) -> Transition<CartPoleState> {
        let force = match action {
            Action::Discrete(1) => p.force_magnifier,
            _ => -p.force_magnifier,
        };
        let next = cartpole_dynamics(s, force, p);
        let terminal = is_terminal(&next);
        Transition {
            next,
            reward: if terminal { 0.0 } else { 1.0 },
            terminal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::ContextualEnv;
    use crate::cmdp::{sample_context, Environment};
    use crate::rng::from_seed;

    #[test]
    fn fixed_default_context_matches_table() {
        let spec = CartPole::context_spec().fixed_at_defaults();
        let ctx = sample_context(&spec, &mut from_seed(0));
        assert_eq!(ctx.values(), &[10.0, 9.8, 1.0, 0.1, 0.5, 0.02]);
    }

    #[test]
    fn upright_rest_is_fixed_point_without_force() {
        let s = CartPoleState::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(cartpole_dynamics(&s, 0.0, &CartPoleParams::default()), s);
    }

    #[test]
    fn opposite_pushes_mirror_each_other() {
        let s = CartPoleState::new(0.0, 0.0, 0.0, 0.0);
        let p = CartPoleParams::default();
        let right = CartPole::transition(&s, &Action::Discrete(1), &p).next;
        let left = CartPole::transition(&s, &Action::Discrete(0), &p).next;
        assert!(right.cart_velocity > 0.0);
        // The pole swings opposite to the cart's acceleration.
        assert!(right.pole_angular_velocity < 0.0);
        assert_eq!(right.cart_velocity, -left.cart_velocity);
        assert_eq!(right.pole_angular_velocity, -left.pole_angular_velocity);
        // Two steps in: the angle itself carries the opposite sign of the push.
        let right2 = cartpole_dynamics(&right, p.force_magnifier, &p);
        assert!(right2.pole_angle < 0.0);
    }

    #[test]
    fn push_right_matches_hand_evaluated_euler_step() {
        // Independent scalar evaluation of the cart-pole equations of motion.
        let (g, mc, mp, l, f, tau) = (9.8_f64, 1.0_f64, 0.1_f64, 0.5_f64, 10.0_f64, 0.02_f64);
        let theta = 0.01_f64;
        let m = mc + mp;
        let temp = f / m; // theta_dot = 0
        let theta_acc =
            (g * theta.sin() - theta.cos() * temp) / (l * (4.0 / 3.0 - mp * theta.cos().powi(2) / m));
        let x_acc = temp - mp * l * theta_acc * theta.cos() / m;
        let expect = CartPoleState::new(0.0, tau * x_acc, theta, tau * theta_acc);

        let s = CartPoleState::new(0.0, 0.0, 0.01, 0.0);
        let got = CartPole::transition(&s, &Action::Discrete(1), &CartPoleParams::default()).next;
        for (a, b) in CartPole::observe(&got).iter().zip(CartPole::observe(&expect)) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        // Frozen values of the same step.
        assert!((got.cart_velocity - 0.195_121_951_219_512_2).abs() < 1e-3);
    }

    #[test]
    fn gravity_changes_next_observation() {
        let s = CartPoleState::new(0.0, 0.0, 0.05, 0.0);
        let mut lo = CartPoleParams::default();
        lo.gravity = 5.0;
        let hi = CartPoleParams::default();
        let a = cartpole_dynamics(&s, 10.0, &lo);
        let b = cartpole_dynamics(&s, 10.0, &hi);
        assert_ne!(a.pole_angular_velocity, b.pole_angular_velocity);
    }

    #[test]
    fn terminal_step_pays_nothing() {
        let s = CartPoleState::new(0.0, 0.0, THETA_THRESHOLD, 3.0);
        let tr = CartPole::transition(&s, &Action::Discrete(0), &CartPoleParams::default());
        assert!(tr.terminal);
        assert_eq!(tr.reward, 0.0);
    }

    #[test]
    fn reset_noise_is_small() {
        let mut env = ContextualEnv::<CartPole>::new();
        let mut rng = from_seed(5);
        for _ in 0..100 {
            let obs = env.reset(&CartPole::context_spec().defaults(), &mut rng).unwrap();
            assert!(obs.iter().all(|x| x.abs() <= 0.05));
        }
    }
}
