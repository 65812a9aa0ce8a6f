//! Point mass that must fly along a compass heading at constant altitude while
//! a 3-axis wind (north, east, down) drags it around.
//!
//! Velocity relaxes towards the wind through a linear drag term. Peak thrust
//! exceeds the drag of the strongest wind in the default bounds, so every
//! training context can be held.

use std::f64::consts::PI;

use rand::Rng as _;

use super::{Dynamics, Transition};
use crate::cmdp::{Action, ActionSpace, Context, ContextSpec, DistSpec, FactorSpec};
use crate::rng::Rng;

/// Peak thrust acceleration per axis, m/s^2.
pub const A_MAX: f64 = 6.0;
/// Linear drag coefficient towards the wind velocity, 1/s.
pub const WIND_DRAG: f64 = 0.15;
/// Integration step, s.
pub const DT: f64 = 0.1;
/// Altitude deviation at which the penalty reaches one half, m.
pub const ALTITUDE_SCALE: f64 = 10.0;
/// Horizontal speed below which heading credit is proportional to along-track speed, m/s.
pub const HEADING_SPEED_FLOOR: f64 = 1.0;
const OBS_SCALE: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindyState {
    /// North, east, down (m).
    pub position: [f64; 3],
    /// North, east, down (m/s).
    pub velocity: [f64; 3],
    /// Horizontal unit vector (north, east).
    pub heading: [f64; 2],
}

/// `(1 - cos)/2` between horizontal velocity and heading, in `[0, 1]`.
pub fn heading_error(velocity: &[f64; 3], heading: &[f64; 2]) -> f64 {
    let speed = velocity[0].hypot(velocity[1]);
    let along = velocity[0] * heading[0] + velocity[1] * heading[1];
    0.5 * (1.0 - along / speed.max(HEADING_SPEED_FLOOR))
}

/// Heading error recovered from an observation vector.
pub fn heading_error_of_observation(obs: &[f64]) -> f64 {
    let v = [obs[0] * OBS_SCALE, obs[1] * OBS_SCALE, obs[2] * OBS_SCALE];
    heading_error(&v, &[obs[4], obs[5]])
}

pub fn altitude_penalty(down: f64) -> f64 {
    down.abs() / (down.abs() + ALTITUDE_SCALE)
}

/// One step of the stated update rule. Returns next state and reward.
pub fn windy_pointmass_dynamics(s: &WindyState, thrust: &[f64], wind: &[f64; 3]) -> (WindyState, f64) {
    let mut next = *s;
    for i in 0..3 {
        let u = thrust[i].clamp(-1.0, 1.0);
        let acc = u * A_MAX + WIND_DRAG * (wind[i] - s.velocity[i]);
        next.velocity[i] = s.velocity[i] + acc * DT;
        next.position[i] = s.position[i] + next.velocity[i] * DT;
    }
    let reward = -(heading_error(&next.velocity, &next.heading) + altitude_penalty(next.position[2]));
    (next, reward)
}

#[derive(Clone, Debug, Default)]
pub struct WindyPointMass;

impl Dynamics for WindyPointMass {
    type State = WindyState;
    type Params = [f64; 3];

    const ID: &'static str = "windy";

    fn context_spec() -> ContextSpec {
        let u = DistSpec::Uniform {
            low: -30.0,
            high: 30.0,
        };
        ContextSpec::new(vec![
            FactorSpec::new("north_wind", 0.0, (-30.0, 30.0), u.clone()),
            FactorSpec::new("east_wind", 0.0, (-30.0, 30.0), u.clone()),
            FactorSpec::new("down_wind", 0.0, (-30.0, 30.0), u),
        ])
        .expect("static windy spec")
    }

    fn observation_dim() -> usize {
        6
    }

    fn action_space() -> ActionSpace {
        ActionSpace::Continuous { dim: 3, bound: 1.0 }
    }

    fn horizon() -> usize {
        300
    }

    fn params(ctx: &Context) -> [f64; 3] {
        let v = ctx.values();
        [v[0], v[1], v[2]]
    }

    fn initial_state(rng: &mut Rng) -> WindyState {
        let psi = rng.gen_range(0.0..2.0 * PI);
        WindyState {
            position: [0.0; 3],
            velocity: [0.0; 3],
            heading: [psi.cos(), psi.sin()],
        }
    }

    fn observe(s: &WindyState) -> Vec<f64> {
        vec![
            s.velocity[0] / OBS_SCALE,
            s.velocity[1] / OBS_SCALE,
            s.velocity[2] / OBS_SCALE,
            s.position[2] / OBS_SCALE,
            s.heading[0],
            s.heading[1],
        ]
    }

    fn transition(s: &WindyState, action: &Action, wind: &[f64; 3]) -> Transition<WindyState> {
        let zero = [0.0; 3];
        let thrust: &[f64] = match action {
            Action::Continuous(a) => a,
            Action::Discrete(_) => &zero,
        };
        let (next, reward) = windy_pointmass_dynamics(s, thrust, wind);
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

    fn rest() -> WindyState {
        WindyState {
            position: [0.0; 3],
            velocity: [0.0; 3],
            heading: [1.0, 0.0],
        }
    }

    #[test]
    fn calm_rest_stays_put() {
        let (n, _) = windy_pointmass_dynamics(&rest(), &[0.0; 3], &[0.0; 3]);
        assert_eq!(n.position, [0.0; 3]);
        assert_eq!(n.velocity, [0.0; 3]);
    }

    #[test]
    fn moving_with_the_wind_has_no_drag() {
        let mut s = rest();
        s.velocity = [7.0, 0.0, 0.0];
        let (n, _) = windy_pointmass_dynamics(&s, &[0.0; 3], &[7.0, 0.0, 0.0]);
        assert_eq!(n.velocity, s.velocity);
    }

    #[test]
    fn one_step_matches_direct_formula() {
        let s = WindyState {
            position: [1.0, -2.0, 0.5],
            velocity: [3.0, 1.0, -0.5],
            heading: [0.6, 0.8],
        };
        let wind = [10.0, -5.0, 3.0];
        let thrust = [0.5, -2.0, 0.25];
        let clipped = [0.5, -1.0, 0.25];
        let mut v = [0.0; 3];
        let mut p = [0.0; 3];
        for i in 0..3 {
            v[i] = s.velocity[i] + (clipped[i] * A_MAX + 0.15 * (wind[i] - s.velocity[i])) * 0.1;
            p[i] = s.position[i] + v[i] * 0.1;
        }
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let cos = (v[0] * 0.6 + v[1] * 0.8) / speed;
        let reward = -(0.5 * (1.0 - cos) + p[2].abs() / (p[2].abs() + 10.0));
        let (n, r) = windy_pointmass_dynamics(&s, &thrust, &wind);
        for i in 0..3 {
            assert!((n.velocity[i] - v[i]).abs() < 1e-14);
            assert!((n.position[i] - p[i]).abs() < 1e-14);
        }
        assert!((r - reward).abs() < 1e-14);
    }

    #[test]
    fn heading_error_extremes() {
        assert_eq!(heading_error(&[5.0, 0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(heading_error(&[-5.0, 0.0, 0.0], &[1.0, 0.0]), 1.0);
        assert_eq!(heading_error(&[0.0, 0.0, 3.0], &[1.0, 0.0]), 0.5);
    }

    #[test]
    fn down_wind_changes_next_observation() {
        let (a, _) = windy_pointmass_dynamics(&rest(), &[0.0; 3], &[0.0, 0.0, 5.0]);
        let (b, _) = windy_pointmass_dynamics(&rest(), &[0.0; 3], &[0.0, 0.0, -5.0]);
        assert_ne!(WindyPointMass::observe(&a), WindyPointMass::observe(&b));
    }
}
