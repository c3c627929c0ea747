use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::game::{approximate_equilibrium, two_point_candidate, verify_nash, ApproxSettings, GameError};
use crate::queue::{MixedProfile, ModelParams, PureProfile, State};
use crate::rational::{format_rational, Rational};

/// How every player picks an action each period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Mlewa { eta: f64 },
    MyopicStage,
    AllZero,
    LastSlot,
    FixedMixed { profile: MixedProfile },
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Mlewa { .. } => "mlewa",
            PolicyKind::MyopicStage => "myopic",
            PolicyKind::AllZero => "all_zero",
            PolicyKind::LastSlot => "last_slot",
            PolicyKind::FixedMixed { .. } => "fixed_mixed",
        }
    }
}

/// Gain accepted when a two-point profile is checked on a state with unequal counts.
pub const TWO_POINT_ACCEPT_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Selection {
    /// `k > T`: the unique stage CCE.
    AllZero,
    /// Symmetric two-point profile; `verified` when the counts are not all one
    /// and the profile passed an exact deviation check.
    TwoPoint { verified: bool },
    /// Grid profile with the smallest deviation gain found.
    Grid { resolution: u32, max_deviation_gain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MyopicChoice {
    pub counts: Vec<u64>,
    pub profile: MixedProfile,
    pub selection: Selection,
}

/// Myopic selections keyed by the counts sorted in decreasing order; shareable across runs.
#[derive(Debug, Clone, Default)]
pub struct MyopicCache {
    inner: Arc<Mutex<HashMap<Vec<u64>, MyopicChoice>>>,
}

impl MyopicCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_penalty(penalty: Rational, threshold: Rational, regime: &'static str) -> Result<(), GameError> {
    if penalty <= threshold {
        return Err(GameError::PenaltyTooSmall {
            penalty: format_rational(&penalty),
            threshold: format_rational(&threshold),
            regime,
        });
    }
    Ok(())
}

/// Stage-game equilibrium played by the myopic policy in `state`.
///
/// Overloaded states (`k > T`) need `C_k > k^2 T` and get the all-zero profile.
/// Otherwise `C_k > k^2` is required; the two-point profile is used when it is
/// an exact equilibrium and the grid search otherwise.
pub fn myopic_policy(
    params: &ModelParams,
    state: &State,
    grid: ApproxSettings,
    cache: &MyopicCache,
) -> Result<MyopicChoice, GameError> {
    params.check_state(state)?;
    let k = state.total();
    let period = params.period() as u64;
    let penalty = params.penalty_at(k);
    if k > period {
        check_penalty(
            penalty,
            Rational::from_integer((k * k * period) as i64),
            "k > T needs C_k > k^2 T",
        )?;
        return Ok(MyopicChoice {
            counts: state.counts().to_vec(),
            profile: MixedProfile::pure(&PureProfile::uniform(params.players(), 0), params.period()),
            selection: Selection::AllZero,
        });
    }
    check_penalty(
        penalty,
        Rational::from_integer((k * k) as i64),
        "k <= T needs C_k > k^2",
    )?;

    let mut order: Vec<usize> = (0..state.players()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(state.count(i)));
    let canonical: Vec<u64> = order.iter().map(|&i| state.count(i)).collect();

    let cached = cache.inner.lock().expect("cache lock").get(&canonical).cloned();
    let choice = match cached {
        Some(choice) => choice,
        None => {
            let choice = solve_canonical(params, &State::new(canonical.clone())?, grid)?;
            cache
                .inner
                .lock()
                .expect("cache lock")
                .entry(canonical)
                .or_insert(choice)
                .clone()
        }
    };

    let mut strategies = vec![Vec::new(); state.players()];
    for (slot, &player) in order.iter().enumerate() {
        strategies[player] = choice.profile.strategy(slot).to_vec();
    }
    Ok(MyopicChoice {
        counts: state.counts().to_vec(),
        profile: MixedProfile::new(strategies)?,
        selection: choice.selection,
    })
}

fn solve_canonical(params: &ModelParams, state: &State, grid: ApproxSettings) -> Result<MyopicChoice, GameError> {
    let candidate = two_point_candidate(params, state)?;
    if state.is_unit() {
        return Ok(MyopicChoice {
            counts: state.counts().to_vec(),
            profile: candidate,
            selection: Selection::TwoPoint { verified: false },
        });
    }
    let cert = verify_nash(params, state, &candidate, TWO_POINT_ACCEPT_GAIN)?;
    if cert.is_epsilon_nash {
        return Ok(MyopicChoice {
            counts: state.counts().to_vec(),
            profile: candidate,
            selection: Selection::TwoPoint { verified: true },
        });
    }
    let found = approximate_equilibrium(params, state, grid)?;
    Ok(MyopicChoice {
        counts: state.counts().to_vec(),
        profile: found.profile,
        selection: Selection::Grid {
            resolution: found.resolution,
            max_deviation_gain: found.max_deviation_gain,
        },
    })
}

impl From<GameError> for DynamicsError {
    fn from(e: GameError) -> Self {
        DynamicsError::Game(e)
    }
}
