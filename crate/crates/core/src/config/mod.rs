//! Experiment configuration: a flat namespace of dotted keys in TOML.
//!
//! ```toml
//! model.players = 3
//! model.period = 5
//! penalty.kind = "constant"
//! penalty.value = "321"
//! policy.kind = "myopic"
//! run.horizon = 10000
//! run.seeds = [1]
//! ```
//!
//! Nested tables are accepted and flattened to the same keys. Every problem
//! in a document is reported at once.

mod parse;
mod presets;
mod sweep;

pub use parse::{apply_overrides, parse_config, serialize_config, KNOWN_KEYS};
pub use presets::{preset, preset_names, Preset, PRESETS};
pub use sweep::{
    execute, replay, single_run_config, ExecutionReport, ReplayOutcome, RunRecord, AGGREGATE_FILE, REPORT_SCHEMA,
};

use serde::Serialize;

use crate::game::{ApproxSettings, DEFAULT_GRID_CAP};
use crate::queue::{PenaltySchedule, DEFAULT_EXACT_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Simulate the repeated game.
    Run,
    /// Certify the two-point stage equilibrium at the initial state.
    CertifyNash,
    /// Certify that the all-zero profile is the only stage CCE at the initial state.
    CertifyCce,
    /// Simulate the reinforced random walk and evaluate its product bound.
    Walk,
    /// Compare the closed-form late probabilities with tie-order averaging.
    TieOracle,
    /// Check that arriving at `T - k` is the unique cheapest action when `k < T`.
    CheapestAction,
    /// Check that action 0 saves more than `n_i` for a player with many jobs.
    LargeCountDominance,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Run,
        Task::CertifyNash,
        Task::CertifyCce,
        Task::Walk,
        Task::TieOracle,
        Task::CheapestAction,
        Task::LargeCountDominance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Run => "run",
            Task::CertifyNash => "certify_nash",
            Task::CertifyCce => "certify_cce",
            Task::Walk => "walk",
            Task::TieOracle => "tie_oracle",
            Task::CheapestAction => "cheapest_action",
            Task::LargeCountDominance => "large_count_dominance",
        }
    }

    /// Tasks that do not use the model section.
    pub fn is_standalone(self) -> bool {
        matches!(self, Task::Walk | Task::TieOracle | Task::LargeCountDominance)
    }

    pub fn is_suite(self) -> bool {
        matches!(self, Task::TieOracle | Task::CheapestAction | Task::LargeCountDominance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Mlewa,
    Myopic,
    AllZero,
    LastSlot,
    FixedMixed,
}

impl PolicyName {
    pub const ALL: [PolicyName; 5] = [
        PolicyName::Mlewa,
        PolicyName::Myopic,
        PolicyName::AllZero,
        PolicyName::LastSlot,
        PolicyName::FixedMixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyName::Mlewa => "mlewa",
            PolicyName::Myopic => "myopic",
            PolicyName::AllZero => "all_zero",
            PolicyName::LastSlot => "last_slot",
            PolicyName::FixedMixed => "fixed_mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyConfig {
    pub kind: PolicyName,
    pub eta: f64,
    /// Per-player strategies for `fixed_mixed`.
    pub profile: Option<Vec<Vec<f64>>>,
    pub grid_resolution: u32,
    pub refine_rounds: u32,
    pub refine_window: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SeedSpec {
    List(Vec<u64>),
    /// `start..end` or `start..=end`.
    Range {
        start: u64,
        end: u64,
        inclusive: bool,
    },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, end, inclusive } => {
                if *inclusive {
                    (*start..=*end).collect()
                } else {
                    (*start..*end).collect()
                }
            }
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            SeedSpec::List(v) => v.len() as u64,
            SeedSpec::Range { start, end, inclusive } => {
                end.saturating_sub(*start) + u64::from(*inclusive && end >= start)
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub path: Option<String>,
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Caps {
    pub exact_profiles: u64,
    pub grid_tuples: u64,
    pub max_runs: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            exact_profiles: DEFAULT_EXACT_CAP,
            grid_tuples: DEFAULT_GRID_CAP,
            max_runs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertions {
    pub enabled: bool,
    /// Every `k_t`, including the final state, stays at or below this.
    pub max_k: Option<u64>,
    /// `k_t = k_0 + (N - 1) t` at every step.
    pub linear_growth: bool,
    /// Fraction of runs whose second-half maximum exceeds the first-half maximum by at most `N`.
    pub non_divergence: Option<f64>,
    /// No violation of the action-0 lower bound or the first-visit bound, and
    /// average regret at the most visited level within the exponential-weights bound.
    pub lemma_bounds: bool,
    /// Overloaded periods are played at zero and never increase the load.
    pub regimes: bool,
}

impl Default for Assertions {
    fn default() -> Self {
        Assertions {
            enabled: true,
            max_k: None,
            linear_growth: false,
            non_divergence: None,
            lemma_bounds: false,
            regimes: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepConfig {
    pub players: Vec<usize>,
    pub period: Vec<usize>,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkConfig {
    pub scale: f64,
    pub eta: f64,
    pub divisor: u64,
    pub d: f64,
    pub max_jump: u64,
    pub z0: u64,
    pub start: u64,
    /// A run counts as bounded when its supremum stays below this.
    pub sup_limit: u64,
    /// Upper end of the product-bound sweep, which starts at `z0 + M`.
    pub sweep_to: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            scale: 5.0,
            eta: 0.1,
            divisor: 1,
            d: 3.0,
            max_jump: 3,
            z0: 10,
            start: 0,
            sup_limit: 10_000,
            sweep_to: 1000,
        }
    }
}

/// Parameters of the property-suite tasks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckConfig {
    pub max_total: u64,
    pub max_period: usize,
    pub periods: Vec<usize>,
    pub cases: u64,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            max_total: 6,
            max_period: 5,
            periods: vec![3, 4, 5, 6],
            cases: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub task: Task,
    pub players: usize,
    pub period: usize,
    pub allow_short_period: bool,
    pub initial_counts: Option<Vec<u64>>,
    pub penalty: PenaltySchedule,
    pub policy: PolicyConfig,
    pub horizon: u64,
    pub seeds: SeedSpec,
    pub output: OutputConfig,
    pub caps: Caps,
    pub assertions: Assertions,
    pub sweep: SweepConfig,
    pub certify_epsilon: f64,
    pub walk: WalkConfig,
    pub check: CheckConfig,
}

impl RunConfig {
    pub fn approx_settings(&self) -> ApproxSettings {
        ApproxSettings {
            resolution: self.policy.grid_resolution,
            refine_rounds: self.policy.refine_rounds,
            window: self.policy.refine_window,
            cap: self.caps.grid_tuples,
        }
    }

    /// `(players, period, eta)` for every swept combination, in nested order.
    pub fn combinations(&self) -> Vec<(usize, usize, f64)> {
        let players = if self.sweep.players.is_empty() {
            vec![self.players]
        } else {
            self.sweep.players.clone()
        };
        let periods = if self.sweep.period.is_empty() {
            vec![self.period]
        } else {
            self.sweep.period.clone()
        };
        let etas = if self.sweep.eta.is_empty() {
            vec![self.policy.eta]
        } else {
            self.sweep.eta.clone()
        };
        let mut out = Vec::new();
        for &n in &players {
            for &t in &periods {
                for &eta in &etas {
                    out.push((n, t, eta));
                }
            }
        }
        out
    }

    /// Number of runs the configuration expands to.
    pub fn run_count(&self) -> u64 {
        match self.task {
            Task::Run | Task::Walk => self.combinations().len() as u64 * self.seeds.len(),
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Run(String),
}

impl ConfigError {
    /// Process exit code: 2 for configuration problems, 3 for runtime or I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Invalid(_) => 2,
            ConfigError::Io(_) | ConfigError::Run(_) => 3,
        }
    }
}
