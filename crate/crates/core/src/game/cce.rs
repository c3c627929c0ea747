//! Certificate that the all-zero profile is the only coarse correlated
//! equilibrium of an overloaded stage game (`k > T`).
//!
//! For a correlated distribution `tau` to be a CCE, the summed gains from every
//! player deviating to action 0 must satisfy
//! `sum_{a != 0} tau(a) * margin(a) >= 0` with
//! `margin(a) = sum_i n_i [ (p_i(0, a_-i) - p_i(a)) C_k + a_i ]`.
//! If every margin is strictly negative, `tau` can put no mass outside `0`.

use serde::Serialize;

use super::GameError;
use crate::queue::{schedule_unchecked, ModelParams, PureProfile, State};
use crate::rational::{format_rational, Rational};

pub const DEFAULT_PROFILE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapCheck {
    pub player: usize,
    /// Jobs joining at the latest occupied arrival time.
    pub group_size: u64,
    #[serde(serialize_with = "as_text")]
    pub gap: Rational,
    #[serde(serialize_with = "as_text")]
    pub required: Rational,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileMargin {
    pub profile: PureProfile,
    /// `sum_i n_i (p_i(0, a_-i) - p_i(a))`.
    #[serde(serialize_with = "as_text")]
    pub deviation_sum: Rational,
    #[serde(serialize_with = "as_text")]
    pub margin: Rational,
    /// `deviation_sum <= -1/k`.
    pub sum_bound_holds: bool,
    /// For each player at the maximal action: `p_j(a) - p_j(0, a_-j) >= 1/(m k)`.
    pub gap_checks: Vec<GapCheck>,
}

impl ProfileMargin {
    pub fn gaps_hold(&self) -> bool {
        self.gap_checks.iter().all(|g| g.holds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CceVerdict {
    /// Every nonzero profile has a negative margin: all CCE sit on the zero profile.
    Certified,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CceDeviationReport {
    pub counts: Vec<u64>,
    pub period: usize,
    pub total: u64,
    #[serde(serialize_with = "as_text")]
    pub penalty: Rational,
    /// `-C_k / k + T k`, the profile-independent bound on every margin.
    #[serde(serialize_with = "as_text")]
    pub crude_bound: Rational,
    pub margins: Vec<ProfileMargin>,
    pub all_margins_negative: bool,
    pub sum_bound_everywhere: bool,
    pub gaps_everywhere: bool,
    pub margins_within_crude_bound: bool,
    /// Verdict from the exact per-profile margins.
    pub verdict: CceVerdict,
    /// Verdict from the crude bound alone, i.e. whether `C_k > k^2 T`.
    pub crude_verdict: CceVerdict,
}

fn as_text<S: serde::Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(v))
}

fn late(period: usize, state: &State, actions: &[usize], player: usize) -> Rational {
    let stats = schedule_unchecked(period, state.counts(), actions);
    match stats.group(actions[player]) {
        Some(g) if g.size > 0 => Rational::new(g.late() as i64, g.size as i64),
        _ => Rational::from_integer(0),
    }
}

/// Enumerates every nonzero pure profile and computes its deviation margin exactly.
pub fn cce_zero_support_certificate(
    params: &ModelParams,
    state: &State,
    cap: u64,
) -> Result<CceDeviationReport, GameError> {
    params.check_state(state)?;
    let period = params.period();
    let players = params.players();
    let k = state.total();
    if k <= period as u64 {
        return Err(GameError::Precondition(format!(
            "the zero-support certificate needs k > T, got k = {k}, T = {period}"
        )));
    }
    let profiles = (period as u64).checked_pow(players as u32).unwrap_or(u64::MAX);
    if profiles > cap {
        return Err(GameError::EnumerationCap { needed: profiles, cap });
    }

    let penalty = params.penalty_at(k);
    let k_rat = Rational::from_integer(k as i64);
    let crude_bound = -penalty / k_rat + Rational::from_integer(period as i64) * k_rat;
    let neg_inv_k = -Rational::new(1, k as i64);

    let mut margins = Vec::with_capacity(profiles as usize - 1);
    let mut actions = vec![0usize; players];
    // Odometer over all profiles; the first one is the all-zero profile, skipped.
    loop {
        let mut pos = 0;
        loop {
            if pos == players {
                break;
            }
            actions[pos] += 1;
            if actions[pos] < period {
                break;
            }
            actions[pos] = 0;
            pos += 1;
        }
        if pos == players {
            break;
        }

        let mut deviation_sum = Rational::from_integer(0);
        let mut waiting = Rational::from_integer(0);
        let mut zero_late = Vec::with_capacity(players);
        for i in 0..players {
            let n = Rational::from_integer(state.count(i) as i64);
            let mut deviated = actions.clone();
            deviated[i] = 0;
            let p0 = late(period, state, &deviated, i);
            let pa = late(period, state, &actions, i);
            deviation_sum += n * (p0 - pa);
            waiting += n * Rational::from_integer(actions[i] as i64);
            zero_late.push((p0, pa));
        }
        let margin = deviation_sum * penalty + waiting;

        let max_action = *actions.iter().max().expect("at least one player");
        let group_size: u64 = (0..players)
            .filter(|&i| actions[i] == max_action)
            .map(|i| state.count(i))
            .sum();
        let gap_checks = (0..players)
            .filter(|&j| actions[j] == max_action && state.count(j) > 0)
            .map(|j| {
                let (p0, pa) = zero_late[j];
                let gap = pa - p0;
                let required = Rational::new(1, (group_size * k) as i64);
                GapCheck {
                    player: j,
                    group_size,
                    gap,
                    required,
                    holds: gap >= required,
                }
            })
            .collect();

        margins.push(ProfileMargin {
            profile: PureProfile::new(actions.clone()),
            deviation_sum,
            margin,
            sum_bound_holds: deviation_sum <= neg_inv_k,
            gap_checks,
        });
    }

    let zero = Rational::from_integer(0);
    let all_margins_negative = margins.iter().all(|m| m.margin < zero);
    let verdict_of = |ok: bool| {
        if ok {
            CceVerdict::Certified
        } else {
            CceVerdict::Inconclusive
        }
    };
    Ok(CceDeviationReport {
        counts: state.counts().to_vec(),
        period,
        total: k,
        penalty,
        crude_bound,
        sum_bound_everywhere: margins.iter().all(|m| m.sum_bound_holds),
        gaps_everywhere: margins.iter().all(ProfileMargin::gaps_hold),
        margins_within_crude_bound: margins.iter().all(|m| m.margin <= crude_bound),
        all_margins_negative,
        verdict: verdict_of(all_margins_negative),
        crude_verdict: verdict_of(crude_bound < zero),
        margins,
    })
}
