//! The repeated game: spillover of late jobs, policies, stability metrics and
//! a reinforced random walk harness.

mod engine;
mod export;
mod policy;
mod stability;
mod walk;

pub use engine::{
    run, step, LearningSummary, LevelRegretSummary, PeriodRecord, PlayerLearning, Pref0Violation, RegimeCheck,
    RunMetadata, RunOptions, RunOutput, RunSummary, StepResult, Trajectory,
};
pub use export::{
    csv_header, write_summary_json, write_trajectory_csv, write_trajectory_json, SUMMARY_SCHEMA, TRAJECTORY_SCHEMA,
};
pub use policy::{myopic_policy, MyopicCache, MyopicChoice, PolicyKind, Selection, TWO_POINT_ACCEPT_GAIN};
pub use stability::{stability_report, StabilityReport};
pub use walk::{
    product_bound_sweep, reinforced_walk_run, validate_walk, ProductBoundRow, ProductBoundSweep, Reinforcement,
    WalkConstants, WalkParams, WalkReport,
};

use crate::game::GameError;
use crate::learning::LearningError;
use crate::queue::QueueError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Game(GameError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error("policy failed at period {period}: {source}")]
    Policy { period: u64, source: GameError },
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("invalid run setup: {0}")]
    Config(String),
    #[error("invalid random walk: {0}")]
    InvalidWalk(String),
    #[error("export failed: {0}")]
    Export(String),
}
