use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::schedule::{cost_unchecked, schedule_unchecked};
use super::{MixedProfile, ModelParams, PureProfile, QueueError, State};
use crate::rational::to_f64;

/// Default bound on the number of pure profiles an exact expectation may enumerate.
pub const DEFAULT_EXACT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Exact { cap: u64 },
    MonteCarlo { seed: u64, samples: u64 },
}

impl Default for EvalMode {
    fn default() -> Self {
        EvalMode::Exact { cap: DEFAULT_EXACT_CAP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedCost {
    pub value: f64,
    /// Standard error of a Monte Carlo estimate; `None` for exact evaluation.
    pub std_error: Option<f64>,
}

/// Visits every pure profile in the product of supports with its probability.
///
/// Players listed in `fixed` are pinned to the given action instead of their
/// mixed strategy.
pub(crate) fn for_each_profile<F>(
    mixed: &MixedProfile,
    fixed: Option<(usize, usize)>,
    cap: u64,
    mut visit: F,
) -> Result<(), QueueError>
where
    F: FnMut(&[usize], f64),
{
    let supports: Vec<Vec<(usize, f64)>> = (0..mixed.players())
        .map(|i| match fixed {
            Some((player, action)) if player == i => vec![(action, 1.0)],
            _ => mixed
                .strategy(i)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| (a, p))
                .collect(),
        })
        .collect();

    let size = supports
        .iter()
        .try_fold(1u64, |acc, s| acc.checked_mul(s.len() as u64))
        .unwrap_or(u64::MAX);
    if size > cap {
        return Err(QueueError::SupportExplosion { profiles: size, cap });
    }

    let mut digits = vec![0usize; supports.len()];
    let mut actions: Vec<usize> = supports.iter().map(|s| s[0].0).collect();
    loop {
        let weight: f64 = digits.iter().zip(&supports).map(|(&d, s)| s[d].1).product();
        visit(&actions, weight);

        let mut pos = 0;
        loop {
            if pos == supports.len() {
                return Ok(());
            }
            digits[pos] += 1;
            if digits[pos] < supports[pos].len() {
                actions[pos] = supports[pos][digits[pos]].0;
                break;
            }
            digits[pos] = 0;
            actions[pos] = supports[pos][0].0;
            pos += 1;
        }
    }
}

/// Expected cost of `player` when every player draws independently from `mixed`.
pub fn expected_cost_mixed(
    params: &ModelParams,
    state: &State,
    mixed: &MixedProfile,
    player: usize,
    mode: EvalMode,
) -> Result<MixedCost, QueueError> {
    params.check_state(state)?;
    params.check_mixed(mixed)?;
    if player >= params.players() {
        return Err(QueueError::PlayerOutOfRange {
            player,
            players: params.players(),
        });
    }
    match mode {
        EvalMode::Exact { cap } => {
            let mut total = 0.0;
            for_each_profile(mixed, None, cap, |actions, w| {
                total += w * to_f64(&cost_unchecked(params, state, actions, player));
            })?;
            Ok(MixedCost {
                value: total,
                std_error: None,
            })
        }
        EvalMode::MonteCarlo { seed, samples } => {
            let samples = samples.max(2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samplers: Vec<WeightedIndex<f64>> = mixed
                .strategies()
                .iter()
                .map(|s| WeightedIndex::new(s).expect("validated distribution"))
                .collect();
            let mut actions = vec![0usize; params.players()];
            let (mut mean, mut m2) = (0.0f64, 0.0f64);
            for n in 1..=samples {
                for (a, sampler) in actions.iter_mut().zip(&samplers) {
                    *a = sampler.sample(&mut rng);
                }
                let x = to_f64(&cost_unchecked(params, state, &actions, player));
                let delta = x - mean;
                mean += delta / n as f64;
                m2 += delta * (x - mean);
            }
            let variance = m2 / (samples - 1) as f64;
            Ok(MixedCost {
                value: mean,
                std_error: Some((variance / samples as f64).sqrt()),
            })
        }
    }
}

/// Expected cost of each own action against the other players' mixed strategies.
pub fn action_costs(
    params: &ModelParams,
    state: &State,
    mixed: &MixedProfile,
    player: usize,
    cap: u64,
) -> Result<Vec<f64>, QueueError> {
    params.check_state(state)?;
    params.check_mixed(mixed)?;
    if player >= params.players() {
        return Err(QueueError::PlayerOutOfRange {
            player,
            players: params.players(),
        });
    }
    let mut costs = vec![0.0; params.period()];
    for (b, cost) in costs.iter_mut().enumerate() {
        for_each_profile(mixed, Some((player, b)), cap, |actions, w| {
            *cost += w * to_f64(&cost_unchecked(params, state, actions, player));
        })?;
    }
    Ok(costs)
}

/// Expected total number of late jobs under independent play of `mixed`.
pub fn expected_late_jobs(
    params: &ModelParams,
    state: &State,
    mixed: &MixedProfile,
    cap: u64,
) -> Result<f64, QueueError> {
    params.check_state(state)?;
    params.check_mixed(mixed)?;
    let mut total = 0.0;
    for_each_profile(mixed, None, cap, |actions, w| {
        total += w * schedule_unchecked(params.period(), state.counts(), actions).total_late() as f64;
    })?;
    Ok(total)
}

/// Draws one pure profile from `mixed`.
pub fn sample_profile<R: rand::Rng + ?Sized>(mixed: &MixedProfile, rng: &mut R) -> PureProfile {
    PureProfile::new(
        mixed
            .strategies()
            .iter()
            .map(|s| WeightedIndex::new(s).expect("validated distribution").sample(rng))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{cost_pure, PenaltySchedule};
    use crate::rational::Rational;

    fn params(n: usize, t: usize, c: i64) -> ModelParams {
        ModelParams::new(n, t, PenaltySchedule::constant(Rational::from_integer(c))).unwrap()
    }

    #[test]
    fn point_mass_matches_pure_cost() {
        let p = params(3, 4, 10);
        let s = State::new(vec![2, 1, 1]).unwrap();
        let a = PureProfile::new(vec![1, 1, 3]);
        let mixed = MixedProfile::pure(&a, 4);
        for i in 0..3 {
            let exact = expected_cost_mixed(&p, &s, &mixed, i, EvalMode::default()).unwrap();
            assert_eq!(exact.value, to_f64(&cost_pure(&p, &s, &a, i).unwrap()));
        }
    }

    #[test]
    fn symmetric_indifference_profile_costs_k() {
        let p = params(3, 3, 10);
        let s = State::unit(3);
        let x1 = 0.3f64.sqrt();
        let mixed = MixedProfile::symmetric(3, vec![1.0 - x1, x1, 0.0]).unwrap();
        for i in 0..3 {
            let c = expected_cost_mixed(&p, &s, &mixed, i, EvalMode::default()).unwrap();
            assert!((c.value - 3.0).abs() < 1e-12, "{}", c.value);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let p = params(3, 3, 10);
        let s = State::new(vec![1, 2, 1]).unwrap();
        let mixed = MixedProfile::new(vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.4, 0.0], vec![0.1, 0.1, 0.8]]).unwrap();
        for i in 0..3 {
            let exact = expected_cost_mixed(&p, &s, &mixed, i, EvalMode::default()).unwrap();
            let mc = expected_cost_mixed(
                &p,
                &s,
                &mixed,
                i,
                EvalMode::MonteCarlo {
                    seed: 11,
                    samples: 40_000,
                },
            )
            .unwrap();
            let se = mc.std_error.unwrap();
            assert!(
                (mc.value - exact.value).abs() <= 4.0 * se,
                "player {i}: {} vs {}",
                mc.value,
                exact.value
            );
        }
    }

    #[test]
    fn exact_mode_refuses_large_supports() {
        let p = params(3, 3, 10);
        let mixed = MixedProfile::symmetric(3, vec![0.25, 0.25, 0.5]).unwrap();
        let err = expected_cost_mixed(&p, &State::unit(3), &mixed, 0, EvalMode::Exact { cap: 26 });
        assert!(matches!(
            err,
            Err(QueueError::SupportExplosion { profiles: 27, cap: 26 })
        ));
    }

    #[test]
    fn action_costs_pin_the_deviator() {
        let p = params(3, 3, 10);
        let x1 = 0.3f64.sqrt();
        let mixed = MixedProfile::symmetric(3, vec![1.0 - x1, x1, 0.0]).unwrap();
        let costs = action_costs(&p, &State::unit(3), &mixed, 0, DEFAULT_EXACT_CAP).unwrap();
        assert!((costs[0] - 3.0).abs() < 1e-12);
        assert!((costs[1] - 3.0).abs() < 1e-12);
        assert!(costs[2] > 3.0);
    }
}
