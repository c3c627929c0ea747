//! Equilibrium checks for the one-period game.
//!
//! [`verify_nash`] certifies a mixed profile against unilateral deviations,
//! [`solve_two_point_equilibrium`] builds the symmetric equilibrium of the
//! light-load regime, [`cce_zero_support_certificate`] shows that heavy load
//! leaves only the all-zero profile, and the grid routines search small games
//! numerically.

mod cce;
mod grid;
mod nash;

pub use cce::{
    cce_zero_support_certificate, CceDeviationReport, CceVerdict, GapCheck, ProfileMargin, DEFAULT_PROFILE_CAP,
};
pub use grid::{
    approximate_equilibrium, brute_force_nash, grid_epsilon, ApproxSettings, GridEquilibrium, GridSearchResult,
    GridSpec, DEFAULT_GRID_CAP,
};
pub use nash::*;

use crate::queue::QueueError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("penalty {penalty} does not exceed {threshold} required in the {regime} regime")]
    PenaltyTooSmall {
        penalty: String,
        threshold: String,
        regime: &'static str,
    },
    #[error("enumeration needs {needed} items, above the cap of {cap}")]
    EnumerationCap { needed: u64, cap: u64 },
    #[error("no grid profile found at resolution {resolution}")]
    NoEquilibrium { resolution: u32 },
}
