//! Two-link underactuated swing-up (acrobot) with contextual link geometry,
//! masses and moment of inertia. Torque acts on the second joint only.

use std::f64::consts::PI;

use rand::Rng as _;

use super::{wrap_angle, Dynamics, Transition};
use crate::cmdp::{Action, ActionSpace, Context, ContextSpec, DistSpec, FactorSpec};
use crate::rng::Rng;

pub const DT: f64 = 0.2;
pub const MAX_VEL_1: f64 = 4.0 * PI;
pub const MAX_VEL_2: f64 = 9.0 * PI;
pub const GRAVITY: f64 = 9.8;
/// RK4 sub-steps per environment step. A single 0.2 s step drifts by ~1e-2
/// from the true trajectory on fast swings.
pub const RK4_SUBSTEPS: usize = 8;
pub const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];

/// `[theta1, theta2, dtheta1, dtheta2]`; `theta1 = 0` hangs straight down.
pub type AcrobotState = [f64; 4];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcrobotParams {
    pub link_com_1: f64,
    pub link_com_2: f64,
    pub link_length_1: f64,
    pub link_length_2: f64,
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub link_moi: f64,
}

impl Default for AcrobotParams {
    fn default() -> Self {
        AcrobotParams {
            link_com_1: 0.5,
            link_com_2: 0.5,
            link_length_1: 1.0,
            link_length_2: 1.0,
            link_mass_1: 1.0,
            link_mass_2: 1.0,
            link_moi: 1.0,
        }
    }
}

/// Time derivative of the state under a fixed torque on joint 2.
pub fn acrobot_derivative(s: &AcrobotState, torque: f64, p: &AcrobotParams) -> AcrobotState {
    let (m1, m2) = (p.link_mass_1, p.link_mass_2);
    let l1 = p.link_length_1;
    let (lc1, lc2) = (p.link_com_1, p.link_com_2);
    let (i1, i2) = (p.link_moi, p.link_moi);
    let g = GRAVITY;
    let [theta1, theta2, dtheta1, dtheta2] = *s;

    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2).sin();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * theta1.sin()
        + phi2;
    let ddtheta2 = (torque + d1 / d2 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin()
        - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2]
}

fn axpy(s: &AcrobotState, k: &AcrobotState, h: f64) -> AcrobotState {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2], s[3] + h * k[3]]
}

/// One classical RK4 step of length `dt`, without wrapping or clipping.
pub fn rk4_step(s: &AcrobotState, torque: f64, p: &AcrobotParams, dt: f64) -> AcrobotState {
    let k1 = acrobot_derivative(s, torque, p);
    let k2 = acrobot_derivative(&axpy(s, &k1, dt / 2.0), torque, p);
    let k3 = acrobot_derivative(&axpy(s, &k2, dt / 2.0), torque, p);
    let k4 = acrobot_derivative(&axpy(s, &k3, dt), torque, p);
    let mut out = *s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Integrates over `dt` with [`RK4_SUBSTEPS`] equal RK4 steps.
pub fn integrate(s: &AcrobotState, torque: f64, p: &AcrobotParams, dt: f64) -> AcrobotState {
    let h = dt / RK4_SUBSTEPS as f64;
    (0..RK4_SUBSTEPS).fold(*s, |x, _| rk4_step(&x, torque, p, h))
}

fn clamp_velocities(n: AcrobotState) -> AcrobotState {
    [n[0], n[1], n[2].clamp(-MAX_VEL_1, MAX_VEL_1), n[3].clamp(-MAX_VEL_2, MAX_VEL_2)]
}

/// Full environment step: RK4 over [`DT`] with velocity limits applied after
/// every sub-step, then angle wrapping. Light, long links make the system stiff
/// enough that unclamped sub-steps diverge.
pub fn acrobot_dynamics(s: &AcrobotState, torque: f64, p: &AcrobotParams) -> AcrobotState {
    let h = DT / RK4_SUBSTEPS as f64;
    let n = (0..RK4_SUBSTEPS).fold(*s, |x, _| clamp_velocities(rk4_step(&x, torque, p, h)));
    [wrap_angle(n[0]), wrap_angle(n[1]), n[2], n[3]]
}

/// Free end above the first joint by half the total arm length. With unit
/// links this is the classic `-cos(t1) - cos(t1 + t2) > 1`.
pub fn reached_target(s: &AcrobotState, p: &AcrobotParams) -> bool {
    let height = -p.link_length_1 * s[0].cos() - p.link_length_2 * (s[0] + s[1]).cos();
    height > 0.5 * (p.link_length_1 + p.link_length_2)
}

#[derive(Clone, Debug, Default)]
pub struct Acrobot;

impl Dynamics for Acrobot {
    type State = AcrobotState;
    type Params = AcrobotParams;

    const ID: &'static str = "acrobot";

    fn context_spec() -> ContextSpec {
        let g = DistSpec::GaussianMultiplicative { std: 2.0 };
        ContextSpec::new(vec![
            FactorSpec::new("link_com_1", 0.5, (0.0, 1.0), g.clone()),
            FactorSpec::new("link_com_2", 0.5, (0.0, 1.0), g.clone()),
            FactorSpec::new("link_length_1", 1.0, (0.1, 10.0), g.clone()),
            FactorSpec::new("link_length_2", 1.0, (0.1, 10.0), g.clone()),
            FactorSpec::new("link_mass_1", 1.0, (0.1, 10.0), g.clone()),
            FactorSpec::new("link_mass_2", 1.0, (0.1, 10.0), g.clone()),
            FactorSpec::new("link_moi", 1.0, (0.1, 10.0), g),
        ])
        .expect("static acrobot spec")
    }

    fn observation_dim() -> usize {
        6
    }

    fn action_space() -> ActionSpace {
        ActionSpace::Discrete(3)
    }

    fn horizon() -> usize {
        500
    }

    fn params(ctx: &Context) -> AcrobotParams {
        let v = ctx.values();
        AcrobotParams {
            link_com_1: v[0],
            link_com_2: v[1],
            link_length_1: v[2],
            link_length_2: v[3],
            link_mass_1: v[4],
            link_mass_2: v[5],
            link_moi: v[6],
        }
    }

    fn initial_state(rng: &mut Rng) -> AcrobotState {
        let mut u = || rng.gen_range(-0.1..0.1);
        [u(), u(), u(), u()]
    }

    fn observe(s: &AcrobotState) -> Vec<f64> {
        vec![s[0].cos(), s[0].sin(), s[1].cos(), s[1].sin(), s[2], s[3]]
    }

    fn transition(s: &AcrobotState, action: &Action, p: &AcrobotParams) -> Transition<AcrobotState> {
        let torque = match action {
            Action::Discrete(i) => TORQUES[*i],
            Action::Continuous(_) => 0.0,
        };
        let next = acrobot_dynamics(s, torque, p);
        let terminal = reached_target(&next, p);
        Transition {
            next,
            reward: if terminal { 0.0 } else { -1.0 },
            terminal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn hanging_rest_is_an_equilibrium() {
        let s = [0.0; 4];
        assert_eq!(acrobot_dynamics(&s, 0.0, &AcrobotParams::default()), s);
    }

    #[test]
    fn heavier_second_link_changes_next_state() {
        let s = [0.3, -0.2, 0.5, 0.1];
        let base = AcrobotParams::default();
        let mut heavy = base;
        heavy.link_mass_2 *= 2.0;
        assert_ne!(acrobot_dynamics(&s, 1.0, &base), acrobot_dynamics(&s, 1.0, &heavy));
    }

    fn fine_euler(s: &AcrobotState, torque: f64, p: &AcrobotParams, h: f64) -> AcrobotState {
        let mut e = *s;
        for _ in 0..(DT / h).round() as usize {
            let d = acrobot_derivative(&e, torque, p);
            e = axpy(&e, &d, h);
        }
        e
    }

    #[test]
    fn rk4_step_matches_fine_euler_integration() {
        // States drawn like episode starts; the Euler oracle uses step 1e-5.
        let mut rng = from_seed(17);
        let p = AcrobotParams::default();
        for _ in 0..5 {
            let s: AcrobotState = std::array::from_fn(|_| rng.gen_range(-0.1..0.1));
            let torque = TORQUES[rng.gen_range(0..3)];
            let fast = integrate(&s, torque, &p, DT);
            let e = fine_euler(&s, torque, &p, 1e-5);
            for i in 0..4 {
                assert!((fast[i] - e[i]).abs() <= 1e-4, "{i}: {} vs {}", fast[i], e[i]);
            }
        }
    }

    #[test]
    fn rk4_step_matches_euler_on_fast_swings() {
        // Euler at 1e-5 is itself off by ~3e-4 here, so the oracle is refined to 1e-6.
        let mut rng = from_seed(18);
        let p = AcrobotParams::default();
        for _ in 0..5 {
            let s: AcrobotState = [
                rng.gen_range(-PI..PI),
                rng.gen_range(-PI..PI),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let torque = TORQUES[rng.gen_range(0..3)];
            let fast = integrate(&s, torque, &p, DT);
            let e = fine_euler(&s, torque, &p, 1e-6);
            for i in 0..4 {
                assert!((fast[i] - e[i]).abs() <= 1e-4, "{i}: {} vs {}", fast[i], e[i]);
            }
        }
    }

    #[test]
    fn extreme_contexts_stay_finite() {
        for (light, heavy) in [(0.0f64, 10.0f64), (0.1, 10.0), (1.0, 0.1)] {
            let p = AcrobotParams {
                link_com_1: light,
                link_com_2: 1.0,
                link_length_1: heavy,
                link_length_2: heavy,
                link_mass_1: heavy,
                link_mass_2: heavy,
                link_moi: 0.1,
            };
            let mut s = [0.05, -0.05, 0.0, 0.0];
            for t in 0..500 {
                s = acrobot_dynamics(&s, TORQUES[t % 3], &p);
                assert!(s.iter().all(|x| x.is_finite()), "{p:?} step {t}");
                assert!(s[2].abs() <= MAX_VEL_1 && s[3].abs() <= MAX_VEL_2);
            }
        }
    }

    #[test]
    fn classic_target_height_at_unit_links() {
        let p = AcrobotParams::default();
        assert!(reached_target(&[PI, 0.0, 0.0, 0.0], &p));
        assert!(!reached_target(&[0.0, 0.0, 0.0, 0.0], &p));
        // -cos(t1) - cos(t1+t2) = 1 exactly at the boundary.
        assert!(!reached_target(&[PI / 2.0, PI / 2.0, 0.0, 0.0], &p));
    }
}
