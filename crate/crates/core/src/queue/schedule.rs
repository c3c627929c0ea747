use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use super::{ModelParams, PureProfile, QueueError, State};
use crate::rational::Rational;

/// Jobs that join the queue at one arrival time and how many of them beat the deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GroupStat {
    pub arrival: usize,
    pub size: u64,
    pub on_time: u64,
}

impl GroupStat {
    pub fn late(&self) -> u64 {
        self.size - self.on_time
    }
}

/// Per-arrival-time outcome of one period, ordered by arrival time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArrivalGroupStats {
    groups: Vec<GroupStat>,
}

impl ArrivalGroupStats {
    pub fn groups(&self) -> &[GroupStat] {
        &self.groups
    }

    pub fn group(&self, arrival: usize) -> Option<&GroupStat> {
        self.groups
            .binary_search_by_key(&arrival, |g| g.arrival)
            .ok()
            .map(|i| &self.groups[i])
    }

    pub fn total_late(&self) -> u64 {
        self.groups.iter().map(GroupStat::late).sum()
    }

    pub fn total_on_time(&self) -> u64 {
        self.groups.iter().map(|g| g.on_time).sum()
    }
}

/// Runs the single-server FIFO queue for one period.
///
/// The server completes one job per time unit starting at time 0. A job that
/// arrives at `a` behind a busy server exits at `max(previous exit, a) + 1` and
/// is on time iff that exit is at most `period`. Inside one arrival time the
/// order is random, but the number of on-time jobs is not.
pub fn service_schedule(
    params: &ModelParams,
    state: &State,
    profile: &PureProfile,
) -> Result<ArrivalGroupStats, QueueError> {
    params.check_state(state)?;
    params.check_profile(profile)?;
    Ok(schedule_unchecked(params.period(), state.counts(), profile.actions()))
}

pub(crate) fn schedule_unchecked(period: usize, counts: &[u64], actions: &[usize]) -> ArrivalGroupStats {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&i| actions[i]);

    let mut groups: Vec<GroupStat> = Vec::new();
    for &i in &order {
        if counts[i] == 0 {
            continue;
        }
        match groups.last_mut() {
            Some(g) if g.arrival == actions[i] => g.size += counts[i],
            _ => groups.push(GroupStat {
                arrival: actions[i],
                size: counts[i],
                on_time: 0,
            }),
        }
    }

    let deadline = period as u64;
    let mut last_exit = 0u64;
    for g in &mut groups {
        let start = last_exit.max(g.arrival as u64);
        g.on_time = deadline.saturating_sub(start).min(g.size);
        last_exit = start + g.size;
    }
    ArrivalGroupStats { groups }
}

/// Probability that any given job of `player` misses the deadline.
pub fn late_probability(
    params: &ModelParams,
    state: &State,
    profile: &PureProfile,
    player: usize,
) -> Result<Rational, QueueError> {
    check_player(params, player)?;
    let stats = service_schedule(params, state, profile)?;
    Ok(group_late_probability(&stats, profile.action(player)))
}

pub(crate) fn group_late_probability(stats: &ArrivalGroupStats, arrival: usize) -> Rational {
    match stats.group(arrival) {
        Some(g) if g.size > 0 => Rational::new(g.late() as i64, g.size as i64),
        _ => Rational::from_integer(0),
    }
}

/// Waiting cost `n_i (T - a_i)` plus the expected penalty `C_k n_i p_i`.
pub fn cost_pure(
    params: &ModelParams,
    state: &State,
    profile: &PureProfile,
    player: usize,
) -> Result<Rational, QueueError> {
    check_player(params, player)?;
    params.check_state(state)?;
    params.check_profile(profile)?;
    Ok(cost_unchecked(params, state, profile.actions(), player))
}

pub(crate) fn cost_unchecked(params: &ModelParams, state: &State, actions: &[usize], player: usize) -> Rational {
    let stats = schedule_unchecked(params.period(), state.counts(), actions);
    cost_from_stats(params, state, &stats, actions[player], player)
}

pub(crate) fn cost_from_stats(
    params: &ModelParams,
    state: &State,
    stats: &ArrivalGroupStats,
    action: usize,
    player: usize,
) -> Rational {
    let jobs = Rational::from_integer(state.count(player) as i64);
    let waiting = Rational::from_integer((params.period() - action) as i64);
    let penalty = params.penalty_at(state.total());
    jobs * waiting + penalty * jobs * group_late_probability(stats, action)
}

/// Cost of every own action `b` against the other players' actions in `profile`.
pub fn counterfactual_costs(
    params: &ModelParams,
    state: &State,
    profile: &PureProfile,
    player: usize,
) -> Result<Vec<Rational>, QueueError> {
    check_player(params, player)?;
    params.check_state(state)?;
    params.check_profile(profile)?;
    let mut actions = profile.actions().to_vec();
    Ok((0..params.period())
        .map(|b| {
            actions[player] = b;
            cost_unchecked(params, state, &actions, player)
        })
        .collect())
}

/// Draws which jobs beat the deadline and returns each player's late count.
///
/// Inside each arrival group the on-time slots go to a uniformly random subset
/// of the group's jobs.
pub fn sample_late_counts<R: Rng + ?Sized>(
    params: &ModelParams,
    state: &State,
    profile: &PureProfile,
    rng: &mut R,
) -> Result<Vec<u64>, QueueError> {
    let stats = service_schedule(params, state, profile)?;
    Ok(sample_from_stats(state, profile, &stats, rng))
}

pub(crate) fn sample_from_stats<R: Rng + ?Sized>(
    state: &State,
    profile: &PureProfile,
    stats: &ArrivalGroupStats,
    rng: &mut R,
) -> Vec<u64> {
    let counts = state.counts();
    let mut late = counts.to_vec();
    for g in stats.groups() {
        if g.on_time == 0 {
            continue;
        }
        let members: Vec<usize> = (0..counts.len())
            .filter(|&i| profile.action(i) == g.arrival && counts[i] > 0)
            .collect();
        if g.on_time == g.size {
            for &i in &members {
                late[i] = 0;
            }
            continue;
        }
        // Cumulative job offsets let a sampled job index map back to its owner.
        let mut bounds = Vec::with_capacity(members.len());
        let mut acc = 0u64;
        for &i in &members {
            acc += counts[i];
            bounds.push(acc);
        }
        for job in index::sample(rng, g.size as usize, g.on_time as usize).into_iter() {
            let owner = bounds.partition_point(|&b| b <= job as u64);
            late[members[owner]] -= 1;
        }
    }
    late
}

fn check_player(params: &ModelParams, player: usize) -> Result<(), QueueError> {
    if player >= params.players() {
        return Err(QueueError::PlayerOutOfRange {
            player,
            players: params.players(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::PenaltySchedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize, t: usize, c: i64) -> ModelParams {
        ModelParams::with_short_period(n, t, PenaltySchedule::constant(Rational::from_integer(c))).unwrap()
    }

    fn state(c: &[u64]) -> State {
        State::new(c.to_vec()).unwrap()
    }

    fn profile(a: &[usize]) -> PureProfile {
        PureProfile::new(a.to_vec())
    }

    #[test]
    fn staggered_arrivals_are_all_on_time() {
        let stats = service_schedule(&params(3, 3, 10), &state(&[1, 1, 1]), &profile(&[0, 1, 2])).unwrap();
        let got: Vec<(usize, u64, u64)> = stats.groups().iter().map(|g| (g.arrival, g.size, g.on_time)).collect();
        assert_eq!(got, vec![(0, 1, 1), (1, 1, 1), (2, 1, 1)]);
        assert_eq!(stats.total_late(), 0);
    }

    #[test]
    fn simultaneous_arrival_at_one_leaves_one_job_late() {
        let p = params(3, 3, 10);
        let s = state(&[1, 1, 1]);
        let a = profile(&[1, 1, 1]);
        let stats = service_schedule(&p, &s, &a).unwrap();
        assert_eq!(
            stats.groups(),
            &[GroupStat {
                arrival: 1,
                size: 3,
                on_time: 2
            }]
        );
        for i in 0..3 {
            assert_eq!(late_probability(&p, &s, &a, i).unwrap(), Rational::new(1, 3));
        }
        assert_eq!(cost_pure(&p, &s, &a, 0).unwrap(), Rational::new(16, 3));
    }

    #[test]
    fn overloaded_period_at_zero() {
        let p = params(3, 3, 10);
        let s = state(&[2, 1, 1]);
        let a = profile(&[0, 0, 0]);
        let stats = service_schedule(&p, &s, &a).unwrap();
        assert_eq!(
            stats.groups(),
            &[GroupStat {
                arrival: 0,
                size: 4,
                on_time: 3
            }]
        );
        for i in 0..3 {
            assert_eq!(late_probability(&p, &s, &a, i).unwrap(), Rational::new(1, 4));
        }
    }

    #[test]
    fn all_zero_with_room_costs_only_waiting() {
        let p = params(4, 6, 50);
        let s = state(&[2, 1, 1, 1]);
        let a = profile(&[0, 0, 0, 0]);
        assert_eq!(service_schedule(&p, &s, &a).unwrap().total_late(), 0);
        assert_eq!(cost_pure(&p, &s, &a, 0).unwrap(), Rational::from_integer(12));
        assert_eq!(cost_pure(&p, &s, &a, 3).unwrap(), Rational::from_integer(6));
    }

    #[test]
    fn playing_t_minus_k_costs_n_times_k() {
        let p = params(3, 5, 1000);
        let s = state(&[1, 1, 1]);
        for opp in [[0usize, 0], [4, 4], [2, 3], [1, 2]] {
            let a = profile(&[2, opp[0], opp[1]]);
            assert_eq!(cost_pure(&p, &s, &a, 0).unwrap(), Rational::from_integer(3));
        }
    }

    #[test]
    fn last_slot_serves_exactly_one_job() {
        let p = params(3, 5, 1);
        let s = state(&[1, 1, 1]);
        let stats = service_schedule(&p, &s, &profile(&[4, 4, 4])).unwrap();
        assert_eq!(stats.total_on_time(), 1);
        assert_eq!(stats.total_late(), 2);
    }

    #[test]
    fn zero_count_players_are_ignored() {
        let p = params(3, 3, 1);
        let s = state(&[0, 2, 1]);
        let a = profile(&[2, 0, 0]);
        let stats = service_schedule(&p, &s, &a).unwrap();
        assert_eq!(stats.groups().len(), 1);
        assert_eq!(late_probability(&p, &s, &a, 0).unwrap(), Rational::from_integer(0));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let p = params(3, 3, 1);
        assert!(service_schedule(&p, &state(&[1, 1]), &profile(&[0, 0, 0])).is_err());
        assert!(service_schedule(&p, &state(&[1, 1, 1]), &profile(&[0, 3, 0])).is_err());
        assert!(late_probability(&p, &state(&[1, 1, 1]), &profile(&[0, 0, 0]), 3).is_err());
    }

    #[test]
    fn sampled_late_counts_match_group_totals() {
        let p = params(3, 3, 10);
        let s = state(&[1, 1, 1]);
        let a = profile(&[1, 1, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let late = sample_late_counts(&p, &s, &a, &mut rng).unwrap();
            assert_eq!(late.iter().sum::<u64>(), 1);
            assert!(late.iter().all(|&l| l <= 1));
        }
        let none = sample_late_counts(&p, &s, &profile(&[0, 1, 2]), &mut rng).unwrap();
        assert_eq!(none, vec![0, 0, 0]);
    }

    #[test]
    fn counterfactual_costs_cover_every_action() {
        let p = params(3, 3, 10);
        let s = state(&[1, 1, 1]);
        let costs = counterfactual_costs(&p, &s, &profile(&[0, 1, 1]), 0).unwrap();
        assert_eq!(costs.len(), 3);
        assert_eq!(costs[1], Rational::new(16, 3));
        assert_eq!(costs[0], Rational::from_integer(3));
    }
}
