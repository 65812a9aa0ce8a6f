//! PPO with asymmetric actor/critic inputs.

pub mod agent;
pub mod buffer;
pub mod gradcheck;
pub mod loss;
pub mod train;
pub mod variant;

pub use agent::{ActorGrads, ActorStats, Agent, AgentSpec, Batch, CriticGrads};
pub use buffer::{AdvantageEstimator, EpisodeRecord, RolloutBuffer, StepRecord};
pub use train::{IterationMetrics, Optimizers, RolloutRngs, TrainConfig, Trainer};
pub use variant::{ArchVariant, Segment, ALL_VARIANTS};
