//! Exact mechanics of one period of the queueing game.
//!
//! Each player's jobs join a single FIFO queue at the chosen time; the server
//! completes one job per time unit; jobs still queued at the end of the period
//! are late. Everything here is a pure function of its inputs (plus an explicit
//! RNG for sampling).

mod mixed;
mod model;
mod schedule;

pub use mixed::{
    action_costs, expected_cost_mixed, expected_late_jobs, sample_profile, EvalMode, MixedCost, DEFAULT_EXACT_CAP,
};
pub use model::{
    MixedProfile, ModelParams, PenaltySchedule, PureProfile, State, ThresholdStep, DISTRIBUTION_TOLERANCE,
};
pub(crate) use schedule::{cost_from_stats, sample_from_stats, schedule_unchecked};
pub use schedule::{
    cost_pure, counterfactual_costs, late_probability, sample_late_counts, service_schedule, ArrivalGroupStats,
    GroupStat,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueueError {
    #[error("at least 3 players are required, got {0}")]
    TooFewPlayers(usize),
    #[error("period length must be positive")]
    EmptyPeriod,
    #[error("period {period} is shorter than the number of players {players} (the queue cannot be stable); set the short-period override to allow it")]
    PeriodShorterThanPlayers { players: usize, period: usize },
    #[error("penalty must be nonnegative, got {0}")]
    NegativePenalty(String),
    #[error("invalid threshold table: {0}")]
    InvalidThresholdTable(String),
    #[error("state has no players")]
    EmptyState,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("player {player} chose action {action}, outside 0..{period}")]
    ActionOutOfRange {
        player: usize,
        action: usize,
        period: usize,
    },
    #[error("player index {player} out of range for {players} players")]
    PlayerOutOfRange { player: usize, players: usize },
    #[error("invalid mixed strategy for player {player}: {reason}")]
    InvalidDistribution { player: usize, reason: String },
    #[error("exact enumeration needs {profiles} pure profiles, above the cap of {cap}")]
    SupportExplosion { profiles: u64, cap: u64 },
}
