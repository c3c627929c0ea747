//! Strategic queueing with deadlines, penalties and spillover.
//!
//! Players repeatedly choose when their jobs join a single FIFO queue. Jobs
//! that miss the end-of-period deadline pay a penalty and come back the next
//! period, so the number of jobs in the system is endogenous. The crate covers
//! the one-period mechanics ([`queue`]), equilibrium checks of the stage game
//! ([`game`]), exponential-weights learners with one instance per job-count
//! level ([`learning`]), the repeated-game engine ([`dynamics`]) and the
//! experiment front end ([`config`]).

pub mod checks;
pub mod config;
pub mod dynamics;
pub mod game;
pub mod learning;
pub mod queue;
pub mod rational;

pub use rational::Rational;
