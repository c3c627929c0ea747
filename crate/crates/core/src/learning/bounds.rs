//! Checkable inequalities about the weight a learner puts on action 0 once
//! its own job count is large.

use serde::Serialize;

use super::{LearningError, MlewaState};
use crate::queue::{cost_pure, ModelParams, PureProfile, State};
use crate::rational::Rational;

/// Levels above this threshold (`2 T^2`) are where action 0 dominates.
pub fn large_level_threshold(period: usize) -> u64 {
    2 * (period as u64).pow(2)
}

/// Whether the schedule satisfies `C_k > 4 k T` at every `k >= 1`.
pub fn penalty_supports_dominance(params: &ModelParams) -> bool {
    params
        .penalty()
        .dominates_line(Rational::from_integer(4 * params.period() as i64))
}

/// `cost(a) - n_i - cost(0, a_-i)` for a player with `a_i != 0`; positive when
/// playing 0 saves more than `n_i`.
pub fn zero_dominance_margin(
    params: &ModelParams,
    state: &State,
    profile: &PureProfile,
    player: usize,
) -> Result<Rational, LearningError> {
    let at_zero = cost_pure(params, state, &profile.with_action(player, 0), player)?;
    let played = cost_pure(params, state, profile, player)?;
    Ok(played - Rational::from_integer(state.count(player) as i64) - at_zero)
}

/// `x_phi(0) / (x_phi(0) + (1 - x_phi(0)) exp(-eta c n))`.
pub fn pref0_bound_value(first_zero: f64, eta: f64, level: u64, visits: u64) -> f64 {
    let decay = (-eta * level as f64 * visits as f64).exp();
    first_zero / (first_zero + (1.0 - first_zero) * decay)
}

/// Lower bound on the current probability of action 0 at `level`, from the
/// level's first-visit strategy and its visit count.
pub fn pref0_lower_bound(ml: &MlewaState, params: &ModelParams, level: u64) -> Result<f64, LearningError> {
    let threshold = large_level_threshold(params.period());
    if level <= threshold {
        return Err(LearningError::NotApplicable(format!(
            "level {level} does not exceed 2T^2 = {threshold}"
        )));
    }
    if !penalty_supports_dominance(params) {
        return Err(LearningError::NotApplicable(format!(
            "penalty {} does not exceed 4kT for every k",
            params.penalty().describe()
        )));
    }
    let record = ml.level(level).ok_or(LearningError::UnvisitedLevel(level))?;
    Ok(pref0_bound_value(
        record.first_strategy_zero,
        ml.eta(),
        level,
        record.visits,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitBoundCheck {
    /// `Z e^{2 eta T^2}` with `Z` the largest `1/x_phi(0) - 1` over visited levels up to `2T^2`.
    pub reference: Option<f64>,
    /// `(c, (1/x_phi(0) - 1) e^{eta c})` for every visited level.
    pub values: Vec<(u64, f64)>,
    /// Visited levels above `2T^2` whose value exceeds the reference.
    pub violations: Vec<u64>,
}

impl InitBoundCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares the first-visit weights on action 0 against the uniform bound
/// built from the levels up to `2T^2`. Without any such visited level there
/// is no reference and nothing to violate.
pub fn init_bound_check(ml: &MlewaState, period: usize) -> InitBoundCheck {
    let threshold = large_level_threshold(period);
    let eta = ml.eta();
    let odds = |x: f64| 1.0 / x - 1.0;
    let values: Vec<(u64, f64)> = ml
        .levels()
        .iter()
        .map(|(&c, r)| (c, odds(r.first_strategy_zero) * (eta * c as f64).exp()))
        .collect();
    let reference = ml
        .levels()
        .iter()
        .filter(|(&c, _)| c <= threshold)
        .map(|(_, r)| odds(r.first_strategy_zero))
        .reduce(f64::max)
        .map(|z| z * (eta * threshold as f64).exp());
    let violations = match reference {
        Some(b) => values
            .iter()
            .filter(|&&(c, v)| c > threshold && v > b * (1.0 + 1e-9))
            .map(|&(c, _)| c)
            .collect(),
        None => Vec::new(),
    };
    InitBoundCheck {
        reference,
        values,
        violations,
    }
}
