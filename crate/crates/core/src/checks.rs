//! Exhaustive and randomized property suites over the stage game.
//!
//! Each suite returns a report listing the first failures it found; all
//! comparisons are exact.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::learning::{large_level_threshold, zero_dominance_margin, LearningError};
use crate::queue::{cost_pure, late_probability, ModelParams, PenaltySchedule, PureProfile, QueueError, State};
use crate::rational::{format_rational, Rational};

/// Failures kept in a report.
const MAX_FAILURES: usize = 20;

/// Late probability of each player's jobs, averaged over every ordering of the
/// `k` individual jobs used to break ties at equal arrival times.
pub fn permutation_late_probabilities(period: usize, counts: &[u64], actions: &[usize]) -> Vec<Rational> {
    let owners: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| std::iter::repeat_n(i, n as usize))
        .collect();
    let k = owners.len();
    let mut late = vec![0i64; counts.len()];
    let mut orderings = 0i64;
    let mut perm: Vec<usize> = (0..k).collect();
    let mut serve = |perm: &[usize]| {
        let mut queue: Vec<usize> = perm.to_vec();
        queue.sort_by_key(|&j| actions[owners[j]]);
        let mut clock = 0usize;
        for j in queue {
            let start = clock.max(actions[owners[j]]);
            if start + 1 > period {
                late[owners[j]] += 1;
            }
            clock = start + 1;
        }
        orderings += 1;
    };
    // Heap's algorithm.
    let mut c = vec![0usize; k];
    serve(&perm);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            serve(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    counts
        .iter()
        .zip(&late)
        .map(|(&n, &l)| {
            if n == 0 {
                Rational::from_integer(0)
            } else {
                Rational::new(l, orderings * n as i64)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TieMismatch {
    pub period: usize,
    pub counts: Vec<u64>,
    pub actions: Vec<usize>,
    pub player: usize,
    pub closed_form: String,
    pub oracle: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TieOracleReport {
    pub max_total: u64,
    pub max_period: usize,
    pub states: u64,
    pub profiles: u64,
    pub comparisons: u64,
    pub mismatch_count: u64,
    pub mismatches: Vec<TieMismatch>,
    pub passed: bool,
}

fn compositions(total: u64, parts: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if parts == 0 {
        if total == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    for first in 1..=total.saturating_sub(parts as u64 - 1) {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Every state with at least three players, one or more jobs each and
/// `k <= max_total`, every period up to `max_period` and every pure profile.
pub fn tie_order_oracle(max_total: u64, max_period: usize) -> Result<TieOracleReport, QueueError> {
    let mut report = TieOracleReport {
        max_total,
        max_period,
        states: 0,
        profiles: 0,
        comparisons: 0,
        mismatch_count: 0,
        mismatches: Vec::new(),
        passed: true,
    };
    for players in 3..=max_total as usize {
        let mut states = Vec::new();
        for k in players as u64..=max_total {
            compositions(k, players, &mut Vec::new(), &mut states);
        }
        for period in 1..=max_period {
            let params =
                ModelParams::with_short_period(players, period, PenaltySchedule::constant(Rational::from_integer(0)))?;
            for counts in &states {
                report.states += 1;
                let state = State::new(counts.clone())?;
                let mut actions = vec![0usize; players];
                loop {
                    report.profiles += 1;
                    let profile = PureProfile::new(actions.clone());
                    let oracle = permutation_late_probabilities(period, counts, &actions);
                    for (player, expected) in oracle.iter().enumerate() {
                        let closed = late_probability(&params, &state, &profile, player)?;
                        report.comparisons += 1;
                        if closed != *expected {
                            report.mismatch_count += 1;
                            if report.mismatches.len() < MAX_FAILURES {
                                report.mismatches.push(TieMismatch {
                                    period,
                                    counts: counts.clone(),
                                    actions: actions.clone(),
                                    player,
                                    closed_form: format_rational(&closed),
                                    oracle: format_rational(expected),
                                });
                            }
                        }
                    }
                    if !advance(&mut actions, period) {
                        break;
                    }
                }
            }
        }
    }
    report.passed = report.mismatch_count == 0;
    Ok(report)
}

fn advance(actions: &mut [usize], period: usize) -> bool {
    for a in actions.iter_mut() {
        *a += 1;
        if *a < period {
            return true;
        }
        *a = 0;
    }
    false
}

fn random_counts<R: Rng>(rng: &mut R, total: u64, players: usize) -> Vec<u64> {
    // Stars and bars over `total - players` extra jobs.
    let mut cuts: Vec<u64> = (0..players - 1)
        .map(|_| rng.gen_range(0..=total - players as u64))
        .collect();
    cuts.sort_unstable();
    let mut counts = Vec::with_capacity(players);
    let mut prev = 0;
    for c in cuts {
        counts.push(c - prev + 1);
        prev = c;
    }
    counts.push(total - players as u64 - prev + 1);
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheapestActionFailure {
    pub period: usize,
    pub counts: Vec<u64>,
    pub actions: Vec<usize>,
    pub player: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheapestActionReport {
    pub periods: Vec<usize>,
    pub seed: u64,
    pub cases: u64,
    /// Periods that admit no state with `N >= 3` and `k < T`.
    pub skipped_periods: Vec<usize>,
    pub failure_count: u64,
    pub failures: Vec<CheapestActionFailure>,
    pub passed: bool,
}

/// With `k < T`, arriving at `T - k` costs exactly `n_i k` whatever the others
/// do, and every earlier arrival costs strictly more.
pub fn cheapest_action_suite(
    periods: &[usize],
    penalty: &PenaltySchedule,
    cases: u64,
    seed: u64,
) -> Result<CheapestActionReport, QueueError> {
    let usable: Vec<usize> = periods.iter().copied().filter(|&t| t >= 4).collect();
    let mut report = CheapestActionReport {
        periods: periods.to_vec(),
        seed,
        cases: 0,
        skipped_periods: periods.iter().copied().filter(|&t| t < 4).collect(),
        failure_count: 0,
        failures: Vec::new(),
        passed: true,
    };
    if usable.is_empty() {
        report.passed = false;
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let period = usable[case as usize % usable.len()];
        let total = rng.gen_range(3..period as u64);
        let players = rng.gen_range(3..=total as usize);
        let counts = random_counts(&mut rng, total, players);
        let params = ModelParams::with_short_period(players, period, penalty.clone())?;
        let state = State::new(counts.clone())?;
        let player = rng.gen_range(0..players);
        let mut actions: Vec<usize> = (0..players).map(|_| rng.gen_range(0..period)).collect();
        let cheap = period - total as usize;
        actions[player] = cheap;
        let n = counts[player] as i64;
        let mut fail = |detail: String, actions: &[usize]| {
            report.failure_count += 1;
            if report.failures.len() < MAX_FAILURES {
                report.failures.push(CheapestActionFailure {
                    period,
                    counts: counts.clone(),
                    actions: actions.to_vec(),
                    player,
                    detail,
                });
            }
        };
        let base = cost_pure(&params, &state, &PureProfile::new(actions.clone()), player)?;
        let expected = Rational::from_integer(n * total as i64);
        if base != expected {
            fail(
                format!(
                    "cost at T - k is {}, expected {}",
                    format_rational(&base),
                    format_rational(&expected)
                ),
                &actions,
            );
        }
        for earlier in 0..cheap {
            actions[player] = earlier;
            let c = cost_pure(&params, &state, &PureProfile::new(actions.clone()), player)?;
            if c <= base {
                fail(
                    format!(
                        "action {earlier} costs {}, not above {}",
                        format_rational(&c),
                        format_rational(&base)
                    ),
                    &actions,
                );
            }
        }
        report.cases += 1;
    }
    report.passed = report.failure_count == 0;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DominanceFailure {
    pub period: usize,
    pub counts: Vec<u64>,
    pub actions: Vec<usize>,
    pub player: usize,
    pub margin: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DominanceReport {
    pub periods: Vec<usize>,
    pub seed: u64,
    pub cases: u64,
    pub profiles_checked: u64,
    pub failure_count: u64,
    pub failures: Vec<DominanceFailure>,
    pub passed: bool,
}

/// States where one player holds more than `2T^2 + 1` jobs, with `C_k = 4kT + 1`:
/// for every pure profile where that player arrives after 0, moving to 0 saves
/// more than `n_i`.
pub fn large_count_dominance_suite(periods: &[usize], cases: u64, seed: u64) -> Result<DominanceReport, LearningError> {
    let mut report = DominanceReport {
        periods: periods.to_vec(),
        seed,
        cases: 0,
        profiles_checked: 0,
        failure_count: 0,
        failures: Vec::new(),
        passed: true,
    };
    let usable: Vec<usize> = periods.iter().copied().filter(|&t| t >= 2).collect();
    if usable.is_empty() {
        report.passed = false;
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let period = usable[case as usize % usable.len()];
        let players = rng.gen_range(3..=5usize);
        let large = large_level_threshold(period) + 1;
        let mut counts: Vec<u64> = (0..players).map(|_| rng.gen_range(1..=2 * large)).collect();
        let player = rng.gen_range(0..players);
        counts[player] = rng.gen_range(large + 1..=3 * large);
        let order: Vec<usize> = {
            let mut o: Vec<usize> = (0..players).collect();
            o.shuffle(&mut rng);
            o
        };
        let params = ModelParams::with_short_period(players, period, PenaltySchedule::learning_default(period))
            .map_err(LearningError::from)?;
        let state = State::new(counts.clone()).map_err(LearningError::from)?;
        let mut actions = vec![0usize; players];
        loop {
            if actions[player] != 0 {
                report.profiles_checked += 1;
                let profile = PureProfile::new(actions.clone());
                let margin = zero_dominance_margin(&params, &state, &profile, player)?;
                if margin <= Rational::from_integer(0) {
                    report.failure_count += 1;
                    if report.failures.len() < MAX_FAILURES {
                        report.failures.push(DominanceFailure {
                            period,
                            counts: counts.clone(),
                            actions: actions.clone(),
                            player,
                            margin: format_rational(&margin),
                        });
                    }
                }
            }
            if !advance_in(&mut actions, &order, period) {
                break;
            }
        }
        report.cases += 1;
    }
    report.passed = report.failure_count == 0;
    Ok(report)
}

fn advance_in(actions: &mut [usize], order: &[usize], period: usize) -> bool {
    for &i in order {
        actions[i] += 1;
        if actions[i] < period {
            return true;
        }
        actions[i] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_on_a_simple_tie() {
        // Two jobs arriving together at T - 1: one of them is late.
        let p = permutation_late_probabilities(3, &[1, 1, 1], &[2, 2, 0]);
        assert_eq!(
            p,
            vec![Rational::new(1, 2), Rational::new(1, 2), Rational::from_integer(0)]
        );
    }

    #[test]
    fn oracle_splits_a_group_across_owners() {
        // Five jobs at 0 with a deadline of 3: two late, spread uniformly.
        let p = permutation_late_probabilities(3, &[3, 1, 1], &[0, 0, 0]);
        assert!(p.iter().all(|x| *x == Rational::new(2, 5)));
    }

    #[test]
    fn small_exhaustive_oracle() {
        let r = tie_order_oracle(4, 3).unwrap();
        assert!(r.passed, "{:?}", r.mismatches);
        assert!(r.comparisons > 0);
    }

    #[test]
    fn random_counts_are_compositions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let c = random_counts(&mut rng, 7, 4);
            assert_eq!(c.iter().sum::<u64>(), 7);
            assert!(c.iter().all(|&x| x >= 1));
        }
    }

    #[test]
    fn cheapest_action_small() {
        let pen = PenaltySchedule::constant(Rational::from_integer(50));
        let r = cheapest_action_suite(&[3, 4, 5], &pen, 60, 3).unwrap();
        assert!(r.passed, "{:?}", r.failures);
        assert_eq!(r.skipped_periods, vec![3]);
        assert_eq!(r.cases, 60);
    }

    #[test]
    fn dominance_small() {
        let r = large_count_dominance_suite(&[2, 3], 10, 5).unwrap();
        assert!(r.passed, "{:?}", r.failures);
        assert!(r.profiles_checked > 0);
    }
}
