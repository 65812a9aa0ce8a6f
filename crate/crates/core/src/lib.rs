//! Asymmetric actor-critic training for contextual reinforcement learning.
//!
//! The crate is organised around the pieces of a contextual MDP experiment:
//!
//! - [`cmdp`]: contexts (environmental factors), their sampling distributions and
//!   the environment contract.
//! - [`envs`]: contextual CartPole, Acrobot, Pendulum and a windy point-mass task.
//! - [`neural`]: tanh MLPs with hand-written backprop, Adam and policy heads.
//! - [`ppo`]: PPO with a context-aware critic and environmental-factor encoder,
//!   plus the baseline wirings (Robust, SysID, RMA, ...).
//! - [`oracle`]: exact tabular checks of the value and policy-gradient identities.
//! - [`harness`]: experiment configs, evaluation protocols and result files.

pub mod cmdp;
pub mod envs;
pub mod error;
pub mod harness;
pub mod neural;
pub mod oracle;
pub mod ppo;
pub mod rng;

pub use error::{Error, Result};
