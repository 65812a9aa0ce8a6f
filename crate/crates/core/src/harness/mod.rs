//! Experiment orchestration: configs, evaluation protocols, result files,
//! sweeps and the verification suite.

pub mod config;
pub mod eval;
pub mod results;
pub mod run;
pub mod schedule;
pub mod verify;

pub use config::{ContextConfig, ExperimentConfig, FactorOverride, OUTPUT_ROOT_VAR};
pub use eval::{continuous_adaptation_eval, evaluate, AdaptationReport, EvalRecord, EvalRngs, SuccessRule};
pub use results::{aggregate, BandRow, AGGREGATE_HEADER, CURVE_HEADER};
pub use run::{eval_checkpoint, export_plots, run_experiment, run_seed, sweep, RunOutput, SeedRun};
pub use schedule::{randomization_schedule, Schedule, Shift, SCHEDULES};
pub use verify::{run_verification, VerifyReport};
