use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::policy::{myopic_policy, MyopicCache, MyopicChoice, PolicyKind};
use super::DynamicsError;
use crate::game::ApproxSettings;
use crate::learning::{
    init_bound_check, large_level_threshold, penalty_supports_dominance, pref0_bound_value, InitBoundCheck, MlewaState,
    RegretLedger,
};
use crate::queue::{
    cost_from_stats, counterfactual_costs, sample_from_stats, schedule_unchecked, ModelParams, PureProfile, State,
};
use crate::rational::{to_f64, Rational};

/// One period: the state at its start, what was played and what it cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodRecord {
    pub t: u64,
    pub total: u64,
    pub counts: Vec<u64>,
    pub actions: Vec<usize>,
    pub late: Vec<u64>,
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub params: ModelParams,
    pub policy: PolicyKind,
    pub horizon: u64,
    pub initial_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub metadata: RunMetadata,
    pub periods: Vec<PeriodRecord>,
    /// State after the last recorded period.
    pub final_counts: Vec<u64>,
}

impl Trajectory {
    /// `k_0, ..., k_horizon`, including the state after the last period.
    pub fn totals(&self) -> Vec<u64> {
        self.periods
            .iter()
            .map(|p| p.total)
            .chain(std::iter::once(self.final_counts.iter().sum()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: State,
    pub late: Vec<u64>,
    pub costs: Vec<Rational>,
}

/// Plays one period: samples lateness, charges costs and applies spillover.
pub fn step<R: Rng + ?Sized>(
    params: &ModelParams,
    state: &State,
    actions: &PureProfile,
    rng: &mut R,
) -> Result<StepResult, DynamicsError> {
    params.check_state(state)?;
    params.check_profile(actions)?;
    Ok(step_unchecked(params, state, actions, rng))
}

fn step_unchecked<R: Rng + ?Sized>(
    params: &ModelParams,
    state: &State,
    actions: &PureProfile,
    rng: &mut R,
) -> StepResult {
    let stats = schedule_unchecked(params.period(), state.counts(), actions.actions());
    let late = sample_from_stats(state, actions, &stats, rng);
    let costs = (0..state.players())
        .map(|i| cost_from_stats(params, state, &stats, actions.action(i), i))
        .collect();
    let next = State::new(late.iter().map(|l| l + 1).collect()).expect("players are nonempty");
    StepResult { next, late, costs }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Defaults to one job per player.
    pub initial_counts: Option<Vec<u64>>,
    /// Keep every period in the trajectory; the summary is computed either way.
    pub record: bool,
    pub grid: ApproxSettings,
    pub cache: MyopicCache,
    /// Myopic states kept in the summary.
    pub max_selections: usize,
    /// Bound violations kept in the summary.
    pub max_violations: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            initial_counts: None,
            record: true,
            grid: ApproxSettings::default(),
            cache: MyopicCache::new(),
            max_selections: 64,
            max_violations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeCheck {
    pub overloaded_periods: u64,
    /// Every overloaded period was played at the all-zero profile.
    pub zero_profile_when_overloaded: bool,
    /// `N < T` and `k_t > T` always gave `k_{t+1} <= k_t` (vacuous when `N >= T`).
    pub nonincreasing_when_overloaded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRegretSummary {
    pub level: u64,
    pub visits: u64,
    pub regret: f64,
    pub expected_regret: f64,
    pub c_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerLearning {
    pub player: usize,
    pub max_level: u64,
    pub levels: Vec<LevelRegretSummary>,
    pub most_visited_level: u64,
    /// Average expected regret at the most visited level.
    pub average_regret: f64,
    pub ewa_bound: f64,
    pub regret_within_bound: bool,
    pub init_bound: InitBoundCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pref0Violation {
    pub t: u64,
    pub player: usize,
    pub level: u64,
    pub probability: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningSummary {
    pub eta: f64,
    pub players: Vec<PlayerLearning>,
    /// Whether the schedule meets `C_k > 4kT`; without it the bound is not checked.
    pub pref0_applicable: bool,
    pub pref0_checks: u64,
    pub pref0_violation_count: u64,
    pub pref0_violations: Vec<Pref0Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub horizon: u64,
    pub policy: String,
    pub initial_total: u64,
    pub final_total: u64,
    pub max_total: u64,
    /// First period at which the maximum was reached (`horizon` means the final state).
    pub argmax_period: u64,
    pub first_half_max: u64,
    pub second_half_max: u64,
    /// `second_half_max <= first_half_max + N`.
    pub non_divergent: bool,
    pub total_late: u64,
    pub regimes: Option<RegimeCheck>,
    pub myopic_selections: Vec<MyopicChoice>,
    pub learning: Option<LearningSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub summary: RunSummary,
}

enum Agents {
    Fixed(Vec<usize>),
    Mixed(Vec<WeightedIndex<f64>>),
    Myopic,
    Learners {
        learners: Vec<MlewaState>,
        ledgers: Vec<RegretLedger>,
    },
}

/// Runs `horizon` periods from the initial state with a single seeded RNG.
pub fn run(
    params: &ModelParams,
    policy: &PolicyKind,
    horizon: u64,
    seed: u64,
    options: &RunOptions,
) -> Result<RunOutput, DynamicsError> {
    if horizon == 0 {
        return Err(DynamicsError::InvalidHorizon);
    }
    let players = params.players();
    let period = params.period();
    let initial = match &options.initial_counts {
        Some(c) => State::new(c.clone())?,
        None => State::unit(players),
    };
    params.check_state(&initial)?;
    if initial.counts().contains(&0) {
        return Err(DynamicsError::Config("initial counts must be at least 1".into()));
    }

    let mut agents = match policy {
        PolicyKind::AllZero => Agents::Fixed(vec![0; players]),
        PolicyKind::LastSlot => Agents::Fixed(vec![period - 1; players]),
        PolicyKind::FixedMixed { profile } => {
            params.check_mixed(profile)?;
            Agents::Mixed(
                profile
                    .strategies()
                    .iter()
                    .map(|s| WeightedIndex::new(s).expect("validated distribution"))
                    .collect(),
            )
        }
        PolicyKind::MyopicStage => Agents::Myopic,
        PolicyKind::Mlewa { eta } => Agents::Learners {
            learners: initial
                .counts()
                .iter()
                .map(|&c| MlewaState::starting_at(period, *eta, c, 0))
                .collect::<Result<_, _>>()?,
            ledgers: vec![RegretLedger::new(); players],
        },
    };

    let threshold = large_level_threshold(period);
    let pref0_applicable = penalty_supports_dominance(params);
    let mut pref0_checks = 0u64;
    let mut pref0_violation_count = 0u64;
    let mut pref0_violations = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial.clone();
    let mut periods = Vec::with_capacity(if options.record { horizon as usize } else { 0 });
    let mut selections: Vec<MyopicChoice> = Vec::new();
    let mut regimes = RegimeCheck {
        overloaded_periods: 0,
        zero_profile_when_overloaded: true,
        nonincreasing_when_overloaded: true,
    };
    let half = horizon / 2;
    let (mut first_half_max, mut second_half_max) = (0u64, 0u64);
    let (mut max_total, mut argmax_period) = (0u64, 0u64);
    let mut total_late = 0u64;
    let mut actions = vec![0usize; players];

    for t in 0..horizon {
        let k = state.total();
        if k > max_total {
            max_total = k;
            argmax_period = t;
        }
        if t < half {
            first_half_max = first_half_max.max(k);
        } else {
            second_half_max = second_half_max.max(k);
        }

        let mut strategies: Vec<Vec<f64>> = Vec::new();
        match &mut agents {
            Agents::Fixed(fixed) => actions.copy_from_slice(fixed),
            Agents::Mixed(samplers) => {
                for (a, s) in actions.iter_mut().zip(samplers.iter()) {
                    *a = s.sample(&mut rng);
                }
            }
            Agents::Myopic => {
                let choice = myopic_policy(params, &state, options.grid, &options.cache)
                    .map_err(|source| DynamicsError::Policy { period: t, source })?;
                for (i, a) in actions.iter_mut().enumerate() {
                    *a = WeightedIndex::new(choice.profile.strategy(i))
                        .expect("validated distribution")
                        .sample(&mut rng);
                }
                if selections.len() < options.max_selections && !selections.iter().any(|c| c.counts == choice.counts) {
                    selections.push(choice);
                }
            }
            Agents::Learners { learners, .. } => {
                for (i, ml) in learners.iter().enumerate() {
                    let x = ml.strategy();
                    actions[i] = WeightedIndex::new(&x).expect("strictly positive").sample(&mut rng);
                    let level = ml.current_level();
                    if pref0_applicable && level > threshold {
                        let record = ml.level(level).expect("active level is stored");
                        let bound = pref0_bound_value(record.first_strategy_zero, ml.eta(), level, record.visits);
                        pref0_checks += 1;
                        if x[0] < bound * (1.0 - 1e-12) - 1e-15 {
                            pref0_violation_count += 1;
                            if pref0_violations.len() < options.max_violations {
                                pref0_violations.push(Pref0Violation {
                                    t,
                                    player: i,
                                    level,
                                    probability: x[0],
                                    bound,
                                });
                            }
                        }
                    }
                    strategies.push(x);
                }
            }
        }

        let profile = PureProfile::new(actions.clone());
        let outcome = step_unchecked(params, &state, &profile, &mut rng);
        total_late += outcome.late.iter().sum::<u64>();

        if let Agents::Learners { learners, ledgers } = &mut agents {
            for i in 0..players {
                let costs: Vec<f64> = counterfactual_costs(params, &state, &profile, i)?
                    .iter()
                    .map(to_f64)
                    .collect();
                ledgers[i].record(learners[i].current_level(), &costs, actions[i], &strategies[i]);
                learners[i].observe(t, &costs, outcome.late[i])?;
            }
        }

        if k > period as u64 {
            regimes.overloaded_periods += 1;
            if actions.iter().any(|&a| a != 0) {
                regimes.zero_profile_when_overloaded = false;
            }
            if players < period && outcome.next.total() > k {
                regimes.nonincreasing_when_overloaded = false;
            }
        }

        if options.record {
            periods.push(PeriodRecord {
                t,
                total: k,
                counts: state.counts().to_vec(),
                actions: actions.clone(),
                late: outcome.late.clone(),
                costs: outcome.costs.iter().map(to_f64).collect(),
            });
        }
        state = outcome.next;
    }

    let final_total = state.total();
    if final_total > max_total {
        max_total = final_total;
        argmax_period = horizon;
    }
    if horizon >= 2 {
        second_half_max = second_half_max.max(final_total);
    } else {
        first_half_max = first_half_max.max(final_total);
    }

    let learning = match &agents {
        Agents::Learners { learners, ledgers } => Some(LearningSummary {
            eta: learners[0].eta(),
            players: learners
                .iter()
                .zip(ledgers)
                .enumerate()
                .map(|(i, (ml, ledger))| player_learning(i, ml, ledger, period))
                .collect(),
            pref0_applicable,
            pref0_checks,
            pref0_violation_count,
            pref0_violations,
        }),
        _ => None,
    };

    let summary = RunSummary {
        seed,
        horizon,
        policy: policy.label().to_string(),
        initial_total: initial.total(),
        final_total,
        max_total,
        argmax_period,
        first_half_max,
        second_half_max,
        non_divergent: second_half_max <= first_half_max + players as u64,
        total_late,
        regimes: matches!(policy, PolicyKind::MyopicStage).then_some(regimes),
        myopic_selections: selections,
        learning,
    };
    let trajectory = Trajectory {
        metadata: RunMetadata {
            seed,
            params: params.clone(),
            policy: policy.clone(),
            horizon,
            initial_counts: initial.counts().to_vec(),
        },
        periods,
        final_counts: state.counts().to_vec(),
    };
    Ok(RunOutput { trajectory, summary })
}

fn player_learning(player: usize, ml: &MlewaState, ledger: &RegretLedger, period: usize) -> PlayerLearning {
    let levels: Vec<LevelRegretSummary> = ledger
        .levels()
        .iter()
        .map(|(&level, r)| LevelRegretSummary {
            level,
            visits: r.visits,
            regret: r.regret(),
            expected_regret: r.expected_regret(),
            c_max: r.c_max,
        })
        .collect();
    let most = ledger.most_visited().unwrap_or(ml.current_level());
    let (average_regret, ewa_bound) = match ledger.level(most) {
        Some(r) => (r.expected_regret() / r.visits as f64, r.ewa_bound(ml.eta())),
        None => (0.0, f64::INFINITY),
    };
    PlayerLearning {
        player,
        max_level: ml.levels().keys().next_back().copied().unwrap_or(1),
        levels,
        most_visited_level: most,
        average_regret,
        ewa_bound,
        regret_within_bound: average_regret <= ewa_bound,
        init_bound: init_bound_check(ml, period),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::PenaltySchedule;

    fn params(n: usize, t: usize, c: Rational) -> ModelParams {
        ModelParams::new(n, t, PenaltySchedule::constant(c)).unwrap()
    }

    #[test]
    fn all_zero_under_capacity_clears_the_queue() {
        let p = params(3, 5, Rational::from_integer(10));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = step(
            &p,
            &State::new(vec![2, 1, 1]).unwrap(),
            &PureProfile::uniform(3, 0),
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.next, State::unit(3));
    }

    #[test]
    fn last_slot_serves_one_job() {
        let p = params(3, 5, Rational::from_integer(10));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = step(&p, &State::unit(3), &PureProfile::uniform(3, 4), &mut rng).unwrap();
        assert_eq!(out.late.iter().sum::<u64>(), 2);
        assert_eq!(out.next.total(), 5);
    }

    #[test]
    fn last_slot_grows_linearly() {
        let p = params(3, 5, Rational::new(1, 2));
        let out = run(&p, &PolicyKind::LastSlot, 50, 1, &RunOptions::default()).unwrap();
        for (t, k) in out.trajectory.totals().iter().enumerate() {
            assert_eq!(*k, 3 + 2 * t as u64);
        }
    }

    #[test]
    fn all_zero_stays_at_n() {
        let p = params(3, 5, Rational::from_integer(10));
        let out = run(&p, &PolicyKind::AllZero, 30, 4, &RunOptions::default()).unwrap();
        assert!(out.trajectory.totals().iter().all(|&k| k == 3));
        assert_eq!(out.summary.total_late, 0);
    }

    #[test]
    fn myopic_short_run_respects_bound() {
        let p = params(3, 5, Rational::from_integer(321));
        let out = run(&p, &PolicyKind::MyopicStage, 500, 7, &RunOptions::default()).unwrap();
        assert!(out.summary.max_total <= 8);
        let regimes = out.summary.regimes.unwrap();
        assert!(regimes.zero_profile_when_overloaded);
        assert!(regimes.nonincreasing_when_overloaded);
    }

    #[test]
    fn myopic_error_reports_period() {
        let p = params(3, 5, Rational::from_integer(5));
        let err = run(&p, &PolicyKind::MyopicStage, 5, 0, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, DynamicsError::Policy { period: 0, .. }));
    }

    #[test]
    fn runs_are_deterministic() {
        let p = ModelParams::new(3, 5, PenaltySchedule::learning_default(5)).unwrap();
        let policy = PolicyKind::Mlewa { eta: 0.1 };
        let a = run(&p, &policy, 300, 9, &RunOptions::default()).unwrap();
        let b = run(&p, &policy, 300, 9, &RunOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = run(&p, &policy, 300, 10, &RunOptions::default()).unwrap();
        assert_ne!(a.trajectory.periods, c.trajectory.periods);
    }

    #[test]
    fn spillover_law_holds_along_a_learning_run() {
        let p = ModelParams::new(3, 5, PenaltySchedule::learning_default(5)).unwrap();
        let out = run(&p, &PolicyKind::Mlewa { eta: 0.1 }, 400, 2, &RunOptions::default()).unwrap();
        let periods = &out.trajectory.periods;
        for w in periods.windows(2) {
            let next: Vec<u64> = w[0].late.iter().map(|l| l + 1).collect();
            assert_eq!(w[1].counts, next);
            let served = w[0].total - w[0].late.iter().sum::<u64>();
            assert_eq!(w[1].total, w[0].total - served + 3);
        }
    }

    #[test]
    fn large_initial_level_triggers_pref0_checks() {
        let p = ModelParams::new(3, 4, PenaltySchedule::learning_default(4)).unwrap();
        let options = RunOptions {
            initial_counts: Some(vec![40, 1, 1]),
            ..RunOptions::default()
        };
        let out = run(&p, &PolicyKind::Mlewa { eta: 0.1 }, 200, 5, &options).unwrap();
        let learning = out.summary.learning.unwrap();
        assert!(learning.pref0_applicable);
        assert!(learning.pref0_checks > 0);
        assert_eq!(learning.pref0_violation_count, 0);
    }
}
