//! Contextual classic-control environments.
//!
//! Each environment is a pure [`Dynamics`] implementation (state, context-derived
//! parameters, deterministic transition) wrapped in [`ContextualEnv`], which owns
//! the episode bookkeeping: horizon, done-guard and the per-episode context.

pub mod acrobot;
pub mod cartpole;
pub mod pendulum;
pub mod windy;

use std::fmt::Debug;

use crate::cmdp::{Action, ActionSpace, Context, ContextSpec, Environment, Step};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use pendulum::Pendulum;
pub use windy::WindyPointMass;

/// Result of one deterministic transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub next: S,
    pub reward: f64,
    pub terminal: bool,
}

/// Deterministic dynamics of one contextual environment.
pub trait Dynamics: Clone + Send + Sync + 'static {
    type State: Clone + Debug + Send + Sync;
    /// Physical parameters decoded from a context.
    type Params: Clone + Debug + Send + Sync;

    const ID: &'static str;

    fn context_spec() -> ContextSpec;
    fn observation_dim() -> usize;
    fn action_space() -> ActionSpace;
    fn horizon() -> usize;
    fn params(ctx: &Context) -> Self::Params;
    fn initial_state(rng: &mut Rng) -> Self::State;
    fn observe(state: &Self::State) -> Vec<f64>;
    fn transition(state: &Self::State, action: &Action, params: &Self::Params)
        -> Transition<Self::State>;
}

struct Episode<D: Dynamics> {
    state: D::State,
    ctx: Context,
    params: D::Params,
    steps: usize,
    done: bool,
}

impl<D: Dynamics> Clone for Episode<D> {
    fn clone(&self) -> Self {
        Episode {
            state: self.state.clone(),
            ctx: self.ctx.clone(),
            params: self.params.clone(),
            steps: self.steps,
            done: self.done,
        }
    }
}

/// Episode wrapper turning a [`Dynamics`] into an [`Environment`].
pub struct ContextualEnv<D: Dynamics> {
    spec: ContextSpec,
    episode: Option<Episode<D>>,
}

impl<D: Dynamics> Clone for ContextualEnv<D> {
    fn clone(&self) -> Self {
        ContextualEnv {
            spec: self.spec.clone(),
            episode: self.episode.clone(),
        }
    }
}

impl<D: Dynamics> Default for ContextualEnv<D> {
    fn default() -> Self {
        Self::new()
    }
}

impl<D: Dynamics> ContextualEnv<D> {
    pub fn new() -> Self {
        ContextualEnv {
            spec: D::context_spec(),
            episode: None,
        }
    }

    /// Underlying state of the live episode.
    pub fn state(&self) -> Option<&D::State> {
        self.episode.as_ref().map(|e| &e.state)
    }

    fn check_action(&self, action: &Action) -> Result<()> {
        match (D::action_space(), action) {
            (ActionSpace::Discrete(n), Action::Discrete(i)) if *i < n => Ok(()),
            (ActionSpace::Continuous { dim, .. }, Action::Continuous(a)) if a.len() == dim => {
                if a.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Usage(format!("non-finite action {a:?}")))
                }
            }
            (space, a) => Err(Error::Usage(format!(
                "action {a:?} does not fit action space {space:?} of {}",
                D::ID
            ))),
        }
    }
}

impl<D: Dynamics> Environment for ContextualEnv<D> {
    fn id(&self) -> &'static str {
        D::ID
    }

    fn observation_dim(&self) -> usize {
        D::observation_dim()
    }

    fn action_space(&self) -> ActionSpace {
        D::action_space()
    }

    fn context_spec(&self) -> &ContextSpec {
        &self.spec
    }

    fn horizon(&self) -> usize {
        D::horizon()
    }

    fn reset(&mut self, ctx: &Context, rng: &mut Rng) -> Result<Vec<f64>> {
        self.spec.check(ctx)?;
        let state = D::initial_state(rng);
        let obs = D::observe(&state);
        self.episode = Some(Episode {
            state,
            ctx: ctx.clone(),
            params: D::params(ctx),
            steps: 0,
            done: false,
        });
        Ok(obs)
    }

    fn step(&mut self, action: &Action) -> Result<Step> {
        self.check_action(action)?;
        let ep = self
            .episode
            .as_mut()
            .ok_or_else(|| Error::Usage(format!("{}: step called before reset", D::ID)))?;
        if ep.done {
            return Err(Error::Usage(format!(
                "{}: step called on a finished episode",
                D::ID
            )));
        }
        let tr = D::transition(&ep.state, action, &ep.params);
        let observation = D::observe(&tr.next);
        if !(tr.reward.is_finite() && observation.iter().all(|x| x.is_finite())) {
            return Err(Error::Numerical(format!("{}: non-finite state under context {}", D::ID, ep.ctx)));
        }
        ep.state = tr.next;
        ep.steps += 1;
        ep.done = tr.terminal || ep.steps >= D::horizon();
        Ok(Step {
            observation,
            reward: tr.reward,
            done: ep.done,
            terminated: tr.terminal,
        })
    }

    fn context(&self) -> Option<&Context> {
        self.episode.as_ref().map(|e| &e.ctx)
    }

    fn set_context(&mut self, ctx: &Context) -> Result<()> {
        self.spec.check(ctx)?;
        let ep = self
            .episode
            .as_mut()
            .ok_or_else(|| Error::Usage(format!("{}: set_context before reset", D::ID)))?;
        ep.ctx = ctx.clone();
        ep.params = D::params(ctx);
        Ok(())
    }

    fn set_context_spec(&mut self, spec: ContextSpec) -> Result<()> {
        spec.validate()?;
        if spec.names() != self.spec.names() {
            return Err(Error::Config(format!(
                "{}: factor schema {:?} does not match {:?}",
                D::ID,
                spec.names(),
                self.spec.names()
            )));
        }
        self.spec = spec;
        Ok(())
    }

    fn clone_box(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}

pub const ENV_IDS: [&str; 4] = [CartPole::ID, Acrobot::ID, Pendulum::ID, WindyPointMass::ID];

/// Builds an environment from its registry id.
pub fn make_env(id: &str) -> Result<Box<dyn Environment>> {
    Ok(match id {
        CartPole::ID => Box::new(ContextualEnv::<CartPole>::new()),
        Acrobot::ID => Box::new(ContextualEnv::<Acrobot>::new()),
        Pendulum::ID => Box::new(ContextualEnv::<Pendulum>::new()),
        WindyPointMass::ID => Box::new(ContextualEnv::<WindyPointMass>::new()),
        other => {
            return Err(Error::Config(format!(
                "unknown environment `{other}` (expected one of {ENV_IDS:?})"
            )))
        }
    })
}

/// Encoder output width per environment.
pub fn default_encoder_dim(id: &str) -> usize {
    match id {
        Acrobot::ID => 4,
        CartPole::ID => 3,
        Pendulum::ID => 2,
        _ => 3,
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::sample_context;
    use crate::rng::from_seed;
    use rand::Rng as _;

    fn random_action(space: ActionSpace, rng: &mut Rng) -> Action {
        match space {
            ActionSpace::Discrete(n) => Action::Discrete(rng.gen_range(0..n)),
            ActionSpace::Continuous { dim, bound } => {
                Action::Continuous((0..dim).map(|_| rng.gen_range(-bound..bound)).collect())
            }
        }
    }

    #[test]
    fn table_dimensions() {
        let expect = [
            ("acrobot", 6, ActionSpace::Discrete(3), 7),
            ("cartpole", 4, ActionSpace::Discrete(2), 6),
            ("pendulum", 3, ActionSpace::Continuous { dim: 1, bound: 2.0 }, 4),
            ("windy", 6, ActionSpace::Continuous { dim: 3, bound: 1.0 }, 3),
        ];
        for (id, obs, act, factors) in expect {
            let env = make_env(id).unwrap();
            assert_eq!(env.observation_dim(), obs, "{id}");
            assert_eq!(env.action_space(), act, "{id}");
            assert_eq!(env.context_spec().len(), factors, "{id}");
        }
        assert!(make_env("hopper").is_err());
    }

    #[test]
    fn episodes_end_by_horizon_and_reject_extra_steps() {
        for id in ENV_IDS {
            let mut env = make_env(id).unwrap();
            let mut rng = from_seed(1);
            let ctx = env.context_spec().defaults();
            assert!(env.step(&random_action(env.action_space(), &mut rng)).is_err());
            let obs = env.reset(&ctx, &mut rng).unwrap();
            assert_eq!(obs.len(), env.observation_dim());
            let mut steps = 0;
            loop {
                let s = env.step(&random_action(env.action_space(), &mut rng)).unwrap();
                steps += 1;
                assert_eq!(s.observation.len(), env.observation_dim());
                if s.done {
                    break;
                }
            }
            assert!(steps <= env.horizon(), "{id}");
            let err = env.step(&random_action(env.action_space(), &mut rng));
            assert!(matches!(err, Err(Error::Usage(_))), "{id}");
        }
    }

    #[test]
    fn invalid_actions_are_usage_errors() {
        let mut env = make_env("cartpole").unwrap();
        let mut rng = from_seed(0);
        env.reset(&env.context_spec().defaults(), &mut rng).unwrap();
        assert!(env.step(&Action::Discrete(2)).is_err());
        assert!(env.step(&Action::Continuous(vec![0.0])).is_err());
        let mut env = make_env("pendulum").unwrap();
        env.reset(&env.context_spec().defaults(), &mut rng).unwrap();
        assert!(env.step(&Action::Continuous(vec![f64::NAN])).is_err());
    }

    #[test]
    fn identical_seeds_and_actions_give_identical_trajectories() {
        for id in ENV_IDS {
            let mut a = make_env(id).unwrap();
            let mut b = make_env(id).unwrap();
            let mut ctx_rng = from_seed(9);
            let ctx = sample_context(a.context_spec(), &mut ctx_rng);
            let (mut ra, mut rb) = (from_seed(4), from_seed(4));
            assert_eq!(a.reset(&ctx, &mut ra).unwrap(), b.reset(&ctx, &mut rb).unwrap());
            let mut act_rng = from_seed(8);
            loop {
                let act = random_action(a.action_space(), &mut act_rng);
                let sa = a.step(&act).unwrap();
                let sb = b.step(&act).unwrap();
                assert_eq!(sa, sb);
                if sa.done {
                    break;
                }
            }
        }
    }

    #[test]
    fn context_is_constant_within_an_episode() {
        for id in ENV_IDS {
            let mut env = make_env(id).unwrap();
            let mut rng = from_seed(21);
            for _ in 0..5 {
                let ctx = sample_context(env.context_spec(), &mut rng);
                let fp = ctx.fingerprint();
                env.reset(&ctx, &mut rng).unwrap();
                loop {
                    assert_eq!(env.context().unwrap().fingerprint(), fp);
                    let s = env.step(&random_action(env.action_space(), &mut rng)).unwrap();
                    if s.done {
                        break;
                    }
                }
                assert_eq!(env.context().unwrap().fingerprint(), fp);
            }
        }
    }

    #[test]
    fn rewards_stay_in_documented_ranges() {
        use std::f64::consts::PI;
        let pend_floor = -(PI * PI + 0.1 * 64.0 + 0.001 * 4.0);
        for id in ["cartpole", "acrobot", "pendulum"] {
            let mut env = make_env(id).unwrap();
            let mut rng = from_seed(13);
            for _ in 0..20 {
                let ctx = sample_context(env.context_spec(), &mut rng);
                env.reset(&ctx, &mut rng).unwrap();
                loop {
                    let s = env.step(&random_action(env.action_space(), &mut rng)).unwrap();
                    match id {
                        "cartpole" => assert!(s.reward == 0.0 || s.reward == 1.0),
                        "acrobot" => assert!(s.reward == 0.0 || s.reward == -1.0),
                        _ => assert!(s.reward <= 0.0 && s.reward >= pend_floor, "{}", s.reward),
                    }
                    if s.done {
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn set_context_requires_live_episode_and_valid_values() {
        let mut env = make_env("windy").unwrap();
        let ctx = env.context_spec().defaults();
        assert!(env.set_context(&ctx).is_err());
        let mut rng = from_seed(0);
        env.reset(&ctx, &mut rng).unwrap();
        assert!(env.set_context(&Context::new(vec![100.0, 0.0, 0.0])).is_err());
        let other = Context::new(vec![5.0, 0.0, 0.0]);
        env.set_context(&other).unwrap();
        assert_eq!(env.context(), Some(&other));
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }
}
