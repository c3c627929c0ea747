//! Exponential-weights learners.
//!
//! [`EwaState`] is a single full-information learner kept in the log domain.
//! [`MlewaState`] keeps one of them per level (the player's own job count),
//! updates only the active one and seeds new levels from the level they were
//! reached from. [`RegretLedger`] accounts regret level by level.

mod bounds;
mod ewa;
mod mlewa;
mod regret;

pub use bounds::{
    init_bound_check, large_level_threshold, penalty_supports_dominance, pref0_bound_value, pref0_lower_bound,
    zero_dominance_margin, InitBoundCheck,
};
pub use ewa::{ewa_strategy, ewa_update, EwaState};
pub use mlewa::{mlewa_step, LevelRecord, MlewaState, StepOutcome};
pub use regret::{regret_per_level, LevelRegret, RegretLedger};

use crate::queue::QueueError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearningError {
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidEta(f64),
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("learner is at level {expected} but the player holds {found} jobs")]
    LevelMismatch { expected: u64, found: u64 },
    #[error("level {0} has never been visited")]
    UnvisitedLevel(u64),
    #[error("bound not applicable: {0}")]
    NotApplicable(String),
}
