use serde::Serialize;

use super::GameError;
use crate::queue::{action_costs, expected_late_jobs, MixedProfile, ModelParams, State, DEFAULT_EXACT_CAP};
use crate::rational::{format_rational, to_f64, Rational};

/// Mass below this is treated as zero in structure checks.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Two mixed actions are "equal" when no entry differs by more than this.
pub const MIXED_EQUALITY_TOLERANCE: f64 = 1e-9;
const COST_BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    /// Every minimizing action; ties are reported, not broken.
    pub actions: Vec<usize>,
    pub cost: f64,
    pub costs: Vec<f64>,
}

/// Actions minimizing `player`'s expected cost against the others' mixed strategies.
///
/// `player`'s own entry of `opponents` is ignored.
pub fn best_response(
    params: &ModelParams,
    state: &State,
    opponents: &MixedProfile,
    player: usize,
    cap: u64,
) -> Result<BestResponse, GameError> {
    let costs = action_costs(params, state, opponents, player, cap)?;
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * min.abs().max(1.0);
    let actions = costs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c - min <= tol)
        .map(|(a, _)| a)
        .collect();
    Ok(BestResponse {
        actions,
        cost: min,
        costs,
    })
}

/// Which items of the equilibrium structure theorem a profile satisfies.
///
/// Actions are relative to `base = T - k`, the first undominated action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureFlags {
    /// (i) nobody puts mass on actions below `base`.
    pub no_dominated_mass: bool,
    /// (ii) some player mixes on `base` and puts no mass above `base + 1`.
    pub designated_player: bool,
    /// (iii) every other player puts positive mass on `base + 1`.
    pub others_on_next: bool,
    /// (iv) every player with mass on `base` plays the designated player's mixed action.
    pub equal_designated: bool,
    /// (v) `k^2 - k + 1 <= social cost <= k^2`.
    pub social_cost_in_range: bool,
    pub designated: Option<usize>,
}

impl StructureFlags {
    pub fn all(&self) -> bool {
        self.no_dominated_mass
            && self.designated_player
            && self.others_on_next
            && self.equal_designated
            && self.social_cost_in_range
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashCertificate {
    pub profile: MixedProfile,
    pub epsilon: f64,
    pub max_deviation_gain: f64,
    pub deviation_gains: Vec<f64>,
    pub is_epsilon_nash: bool,
    /// Present only when `k <= T`, where the structure items are defined.
    pub structure_flags: Option<StructureFlags>,
    pub social_cost: f64,
    pub player_costs: Vec<f64>,
    #[serde(serialize_with = "serialize_rational")]
    pub penalty: Rational,
}

fn serialize_rational<S: serde::Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(v))
}

/// Exhaustive unilateral-deviation check plus the structure items when `k <= T`.
pub fn verify_nash(
    params: &ModelParams,
    state: &State,
    profile: &MixedProfile,
    epsilon: f64,
) -> Result<NashCertificate, GameError> {
    verify_nash_with_cap(params, state, profile, epsilon, DEFAULT_EXACT_CAP)
}

pub fn verify_nash_with_cap(
    params: &ModelParams,
    state: &State,
    profile: &MixedProfile,
    epsilon: f64,
    cap: u64,
) -> Result<NashCertificate, GameError> {
    params.check_state(state)?;
    params.check_mixed(profile)?;

    let mut gains = Vec::with_capacity(params.players());
    let mut player_costs = Vec::with_capacity(params.players());
    for i in 0..params.players() {
        let costs = action_costs(params, state, profile, i, cap)?;
        let own: f64 = profile.strategy(i).iter().zip(&costs).map(|(x, c)| x * c).sum();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        gains.push((own - min).max(0.0));
        player_costs.push(own);
    }
    let max_gain = gains.iter().copied().fold(0.0, f64::max);
    let social_cost: f64 = player_costs.iter().sum();

    let total = state.total();
    let structure_flags =
        (total <= params.period() as u64).then(|| structure_flags(params, state, profile, social_cost));

    Ok(NashCertificate {
        profile: profile.clone(),
        epsilon,
        max_deviation_gain: max_gain,
        deviation_gains: gains,
        is_epsilon_nash: max_gain <= epsilon,
        structure_flags,
        social_cost,
        player_costs,
        penalty: params.penalty_at(total),
    })
}

fn structure_flags(params: &ModelParams, state: &State, profile: &MixedProfile, social_cost: f64) -> StructureFlags {
    let period = params.period();
    let k = state.total() as usize;
    let base = period - k;
    let next = base + 1;
    let mass = |i: usize, a: usize| profile.strategy(i).get(a).copied().unwrap_or(0.0);
    let positive = |i: usize, a: usize| mass(i, a) > MASS_TOLERANCE;
    let players = params.players();

    let no_dominated_mass = (0..players).all(|i| (0..base).all(|a| !positive(i, a)));

    let designated_ok = |j: usize| positive(j, base) && ((next + 1)..period).all(|a| !positive(j, a));
    let others_ok = |j: usize| (0..players).filter(|&b| b != j).all(|b| positive(b, next));
    let equal_ok = |j: usize| {
        (0..players).filter(|&b| positive(b, base)).all(|b| {
            profile
                .strategy(b)
                .iter()
                .zip(profile.strategy(j))
                .all(|(x, y)| (x - y).abs() <= MIXED_EQUALITY_TOLERANCE)
        })
    };

    let candidates: Vec<usize> = (0..players).filter(|&j| designated_ok(j)).collect();
    let with_others: Vec<usize> = candidates.iter().copied().filter(|&j| others_ok(j)).collect();
    let designated = with_others
        .iter()
        .copied()
        .find(|&j| equal_ok(j))
        .or_else(|| with_others.first().copied())
        .or_else(|| candidates.first().copied());

    let kf = k as f64;
    StructureFlags {
        no_dominated_mass,
        designated_player: !candidates.is_empty(),
        others_on_next: !with_others.is_empty(),
        equal_designated: candidates.iter().any(|&j| equal_ok(j)),
        social_cost_in_range: social_cost >= kf * kf - kf + 1.0 - COST_BOUND_TOLERANCE
            && social_cost <= kf * kf + COST_BOUND_TOLERANCE,
        designated,
    }
}

/// Symmetric profile mixing on `T - k` and `T - k + 1` with
/// `x(T - k + 1) = (k / C_k)^(1 / (N - 1))`, the weight that makes every player
/// indifferent between the two actions.
///
/// Requires one job per player, `k <= T` and `C_k > k^2`.
pub fn solve_two_point_equilibrium(params: &ModelParams, state: &State) -> Result<MixedProfile, GameError> {
    params.check_state(state)?;
    if !state.is_unit() {
        return Err(GameError::Precondition(
            "the two-point equilibrium is defined for one job per player".into(),
        ));
    }
    two_point_candidate(params, state)
}

/// The two-point profile for any job counts; callers must confirm it with [`verify_nash`].
pub fn two_point_candidate(params: &ModelParams, state: &State) -> Result<MixedProfile, GameError> {
    params.check_state(state)?;
    let k = state.total();
    let period = params.period() as u64;
    if k > period {
        return Err(GameError::Precondition(format!(
            "two-point profile needs k <= T, got k = {k} > T = {period}"
        )));
    }
    if k < 2 {
        return Err(GameError::Precondition("two-point profile needs k >= 2".into()));
    }
    let penalty = params.penalty_at(k);
    let threshold = Rational::from_integer((k * k) as i64);
    if penalty <= threshold {
        return Err(GameError::PenaltyTooSmall {
            penalty: format_rational(&penalty),
            threshold: format_rational(&threshold),
            regime: "k <= T needs C_k > k^2",
        });
    }
    let late_weight = (k as f64 / to_f64(&penalty)).powf(1.0 / (params.players() - 1) as f64);
    let base = (period - k) as usize;
    let mut strategy = vec![0.0; params.period()];
    strategy[base] = 1.0 - late_weight;
    strategy[base + 1] = late_weight;
    Ok(MixedProfile::symmetric(params.players(), strategy)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatenessCheck {
    pub expected_late: f64,
    pub positive: bool,
}

/// Expected number of late jobs under independent play of `profile`.
pub fn expected_late_positive(
    params: &ModelParams,
    state: &State,
    profile: &MixedProfile,
) -> Result<LatenessCheck, GameError> {
    let expected_late = expected_late_jobs(params, state, profile, DEFAULT_EXACT_CAP)?;
    Ok(LatenessCheck {
        expected_late,
        positive: expected_late > 0.0,
    })
}
