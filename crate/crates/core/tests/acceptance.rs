//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use dqm::checks::{cheapest_action_suite, large_count_dominance_suite};
use dqm::config::{execute, parse_config, preset};
use dqm::dynamics::{product_bound_sweep, reinforced_walk_run, run, PolicyKind, RunOptions, WalkParams};
use dqm::game::{cce_zero_support_certificate, expected_late_positive, solve_two_point_equilibrium, verify_nash};
use dqm::queue::{cost_pure, late_probability, ModelParams, PenaltySchedule, PureProfile, State};
use dqm::Rational;

/// Largest unilateral gain accepted for the two-point equilibrium.
const NASH_EPSILON: f64 = 1e-9;
/// Distance allowed between the solved weight and `(k / C)^(1 / (N - 1))`.
const WEIGHT_TOLERANCE: f64 = 1e-12;
/// Relative slack on the social-cost interval, which is evaluated in floating point.
const SOCIAL_COST_SLACK: f64 = 1e-9;
/// Runs out of 20 that must be non-divergent.
const NON_DIVERGENT_REQUIRED: usize = 18;
/// Walk supremum limit.
const WALK_SUP_LIMIT: u64 = 10_000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn int(v: i64) -> Rational {
    Rational::from_integer(v)
}

/// Each job is served one time unit at a time; jobs at equal arrival times
/// are queued in `order`. Returns the late-job count of each player.
fn serve_in_order(period: usize, counts: &[u64], actions: &[usize], order: &[(usize, u64)]) -> Vec<u64> {
    let mut queue: Vec<(usize, usize)> = Vec::new();
    let mut late = vec![0u64; counts.len()];
    let mut pending: Vec<(usize, usize)> = order.iter().map(|&(p, _)| (actions[p], p)).collect();
    pending.sort_by_key(|&(a, _)| a);
    let mut next = 0;
    let mut t = 0usize;
    while next < pending.len() || !queue.is_empty() {
        while next < pending.len() && pending[next].0 <= t {
            queue.push(pending[next]);
            next += 1;
        }
        if let Some(&(_, player)) = queue.first() {
            queue.remove(0);
            if t + 1 > period {
                late[player] += 1;
            }
        }
        t += 1;
    }
    late
}

type Job = (usize, u64);

fn permutations(items: &mut Vec<Job>, k: usize, visit: &mut dyn FnMut(&[Job])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn tie_order_oracle() -> Outcome {
    let mut comparisons = 0u64;
    let mut mismatches = Vec::new();
    for players in 3..=6usize {
        // Every count vector with entries >= 1 and total <= 6.
        let mut states: Vec<Vec<u64>> = vec![vec![]];
        for _ in 0..players {
            states = states
                .into_iter()
                .flat_map(|s| (1..=6u64).map(move |c| [s.clone(), vec![c]].concat()))
                .filter(|s| s.iter().sum::<u64>() + (players - s.len()) as u64 <= 6)
                .collect();
        }
        for period in 1..=5usize {
            let params =
                ModelParams::with_short_period(players, period, PenaltySchedule::constant(int(0))).expect("params");
            for counts in &states {
                let state = State::new(counts.clone()).expect("state");
                let k: u64 = counts.iter().sum();
                let profiles = period.pow(players as u32);
                for code in 0..profiles {
                    let actions: Vec<usize> = (0..players).map(|i| code / period.pow(i as u32) % period).collect();
                    let mut jobs: Vec<(usize, u64)> = counts
                        .iter()
                        .enumerate()
                        .flat_map(|(p, &n)| (0..n).map(move |j| (p, j)))
                        .collect();
                    let mut late_sum = vec![0u64; players];
                    let mut orderings = 0u64;
                    permutations(&mut jobs, 0, &mut |order| {
                        for (sum, l) in late_sum.iter_mut().zip(serve_in_order(period, counts, &actions, order)) {
                            *sum += l;
                        }
                        orderings += 1;
                    });
                    debug_assert_eq!(orderings, (1..=k).product::<u64>());
                    let profile = PureProfile::new(actions.clone());
                    for i in 0..players {
                        let oracle = Rational::new(late_sum[i] as i64, (orderings * counts[i]) as i64);
                        let closed = late_probability(&params, &state, &profile, i).expect("late probability");
                        comparisons += 1;
                        if closed != oracle && mismatches.len() < 5 {
                            mismatches.push(format!(
                                "T={period} n={counts:?} a={actions:?} i={i}: {closed} vs {oracle}"
                            ));
                        }
                    }
                }
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{comparisons} exact comparisons, mismatches: {mismatches:?}"),
    )
}

fn cheapest_action() -> Outcome {
    let penalty = PenaltySchedule::constant(int(1000));
    let r = cheapest_action_suite(&[3, 4, 5, 6], &penalty, 1000, 2024).expect("suite");
    outcome(
        r.passed && r.cases == 1000,
        format!(
            "{} cases, {} failures; periods without a state with N >= 3 and k < T: {:?}",
            r.cases, r.failure_count, r.skipped_periods
        ),
    )
}

fn two_point_equilibrium() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for n in [3usize, 4] {
        let k = n as i64;
        for c in [k * k + 1, 2 * k * k, 10 * k * k] {
            let params = ModelParams::new(n, n, PenaltySchedule::constant(int(c))).expect("params");
            let state = State::unit(n);
            let profile = solve_two_point_equilibrium(&params, &state).expect("two-point profile");
            let cert = verify_nash(&params, &state, &profile, NASH_EPSILON).expect("certificate");
            let late = expected_late_positive(&params, &state, &profile).expect("lateness");
            let weight = profile.strategy(0)[n - k as usize + 1];
            let expected = (k as f64 / c as f64).powf(1.0 / (n as f64 - 1.0));
            let lo = (k * k - k + 1) as f64 * (1.0 - SOCIAL_COST_SLACK);
            let hi = (k * k) as f64 * (1.0 + SOCIAL_COST_SLACK);
            let flags = cert.structure_flags.as_ref().is_some_and(|f| f.all());
            let this = cert.is_epsilon_nash
                && cert.max_deviation_gain <= NASH_EPSILON
                && flags
                && (lo..=hi).contains(&cert.social_cost)
                && late.positive
                && (weight - expected).abs() <= WEIGHT_TOLERANCE;
            ok &= this;
            lines.push(format!(
                "N=T={n} C={c}: gain {:.1e}, social cost {:.4}, E[late] {:.4}{}",
                cert.max_deviation_gain,
                cert.social_cost,
                late.expected_late,
                if this { "" } else { " FAILED" }
            ));
        }
    }
    outcome(ok, lines.join("; "))
}

fn cce_zero_support() -> Outcome {
    let params = ModelParams::with_short_period(3, 2, PenaltySchedule::constant(int(19))).expect("params");
    let state = State::unit(3);
    let cert = cce_zero_support_certificate(&params, &state, 1_000_000).expect("certificate");
    // Recompute each margin as the summed saving of moving to 0.
    let mut recomputed = true;
    for m in &cert.margins {
        let mut sum = int(0);
        for i in 0..3 {
            let here = cost_pure(&params, &state, &m.profile, i).expect("cost");
            let zero = cost_pure(&params, &state, &m.profile.with_action(i, 0), i).expect("cost");
            sum += zero - here;
        }
        recomputed &= sum == m.margin;
    }
    let worst = cert.margins.iter().map(|m| m.margin).max().unwrap_or(int(0));
    outcome(
        cert.margins.len() == 7
            && cert.all_margins_negative
            && cert.gaps_everywhere
            && cert.sum_bound_everywhere
            && recomputed,
        format!(
            "{} nonzero profiles, largest margin {worst}, gaps {}, sums {}, independent recomputation {}",
            cert.margins.len(),
            cert.gaps_everywhere,
            cert.sum_bound_everywhere,
            recomputed
        ),
    )
}

fn myopic_stability() -> Outcome {
    let params = ModelParams::new(3, 5, PenaltySchedule::constant(int(321))).expect("params");
    let options = RunOptions::default();
    let results: Vec<_> = (1..=10u64)
        .into_par_iter()
        .map(|seed| run(&params, &PolicyKind::MyopicStage, 10_000, seed, &options).expect("run"))
        .collect();
    let max_k = results.iter().flat_map(|r| r.trajectory.totals()).max().unwrap_or(0);
    let regimes = results.iter().all(|r| {
        r.summary
            .regimes
            .as_ref()
            .is_some_and(|g| g.zero_profile_when_overloaded && g.nonincreasing_when_overloaded)
    });
    outcome(
        max_k <= 8 && regimes,
        format!("10 runs x 10^4 periods, max k_t = {max_k} (bound 8), overloaded periods played at zero: {regimes}"),
    )
}

fn instability() -> Outcome {
    let params = ModelParams::new(3, 5, PenaltySchedule::constant(Rational::new(1, 2))).expect("params");
    let out = run(&params, &PolicyKind::LastSlot, 1000, 1, &RunOptions::default()).expect("run");
    let totals = out.trajectory.totals();
    let bad = totals.iter().enumerate().find(|&(t, &k)| k != 3 + 2 * t as u64);
    outcome(
        bad.is_none() && totals.len() == 1001,
        format!(
            "k_t = 3 + 2t for t = 0..=1000: {}, final k = {}",
            bad.is_none(),
            totals[totals.len() - 1]
        ),
    )
}

fn learning_regime() -> Outcome {
    let params = ModelParams::new(3, 5, PenaltySchedule::learning_default(5)).expect("params");
    let policy = PolicyKind::Mlewa { eta: 0.1 };
    let options = RunOptions {
        record: false,
        ..RunOptions::default()
    };
    let runs: Vec<_> = (1..=20u64)
        .into_par_iter()
        .map(|seed| run(&params, &policy, 100_000, seed, &options).expect("run").summary)
        .collect();
    // Start one player above 2T^2 = 50 so the lower bound on action 0 is exercised.
    let stress_options = RunOptions {
        record: false,
        initial_counts: Some(vec![60, 1, 1]),
        ..RunOptions::default()
    };
    let stress: Vec<_> = (1..=5u64)
        .into_par_iter()
        .map(|seed| {
            run(&params, &policy, 20_000, seed, &stress_options)
                .expect("run")
                .summary
        })
        .collect();

    let learn = |s: &dqm::dynamics::RunSummary| s.learning.clone().expect("learning summary");
    let checks: u64 = runs.iter().chain(&stress).map(|s| learn(s).pref0_checks).sum();
    let stress_checks: u64 = stress.iter().map(|s| learn(s).pref0_checks).sum();
    let violations: u64 = runs.iter().chain(&stress).map(|s| learn(s).pref0_violation_count).sum();
    let non_divergent = runs.iter().filter(|s| s.non_divergent).count();
    let mut regret_ok = true;
    let mut min_slack = f64::INFINITY;
    for s in &runs {
        for p in learn(s).players {
            regret_ok &= p.regret_within_bound;
            min_slack = min_slack.min(p.ewa_bound - p.average_regret);
        }
    }
    let max_k = runs.iter().map(|s| s.max_total).max().unwrap_or(0);
    let a = violations == 0 && stress_checks > 0;
    let b = non_divergent >= NON_DIVERGENT_REQUIRED;
    outcome(
        a && b && regret_ok,
        format!(
            "(a) {violations} violations in {checks} checks ({stress_checks} from runs started at n = 60; \
             plain runs peak at k = {max_k}); (b) {non_divergent}/20 non-divergent; \
             (c) regret within bound for every player: {regret_ok}, min slack {min_slack:.4}"
        ),
    )
}

fn large_count_dominance() -> Outcome {
    let r = large_count_dominance_suite(&[2, 3], 1000, 2024).expect("suite");
    outcome(
        r.passed && r.cases == 1000,
        format!(
            "{} states, {} profiles, {} failures",
            r.cases, r.profiles_checked, r.failure_count
        ),
    )
}

fn reinforced_walk() -> Outcome {
    let wp = WalkParams::default_exponential();
    let sups: Vec<u64> = (1..=100u64)
        .into_par_iter()
        .map(|seed| reinforced_walk_run(&wp, 1_000_000, seed).expect("walk").sup)
        .collect();
    let worst = sups.iter().copied().max().unwrap_or(0);
    let sweep = product_bound_sweep(&wp, wp.z0 + wp.max_jump..=1000).expect("sweep");
    let tightest = sweep
        .rows
        .iter()
        .map(|r| r.log_product + r.b)
        .fold(f64::INFINITY, f64::min);
    outcome(
        worst < WALK_SUP_LIMIT && sweep.all_hold,
        format!(
            "largest supremum over 100 x 10^6 steps {worst}; product bound on {} points, smallest log-margin {tightest:.4}",
            sweep.rows.len()
        ),
    )
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output directory")
        .map(|e| {
            let e = e.expect("entry");
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).expect("file"),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let mut compared = 0;
    let mut differing = Vec::new();
    for (name, overrides) in [
        ("myopic_stability", None),
        ("instability", None),
        ("determinism", None),
        ("mlewa_stability", Some(("run.horizon = 100000", "run.horizon = 5000"))),
        (
            "reinforced_walk",
            Some(("run.horizon = 1000000", "run.horizon = 20000")),
        ),
    ] {
        let mut text = preset(name).expect("preset").text.to_owned();
        if let Some((from, to)) = overrides {
            text = text.replace(from, to);
        }
        let config = parse_config(&text).expect("config");
        let first = tempfile::tempdir().expect("tempdir");
        let second = tempfile::tempdir().expect("tempdir");
        execute(&config, &text, first.path(), 1, false).expect("first execution");
        execute(&config, &text, second.path(), 4, false).expect("second execution");
        let (a, b) = (read_dir(first.path()), read_dir(second.path()));
        if a.keys().ne(b.keys()) {
            differing.push(format!("{name}: file sets differ"));
        }
        for (file, bytes) in &a {
            compared += 1;
            if b.get(file) != Some(bytes) {
                differing.push(format!("{name}/{file}"));
            }
        }
    }
    outcome(
        differing.is_empty() && compared > 0,
        format!("{compared} files regenerated with 1 and 4 workers, differing: {differing:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("tie-order oracle, k <= 6, T <= 5", tie_order_oracle),
        ("cheapest action T - k when k < T", cheapest_action),
        ("two-point equilibrium, N = T = 3, 4", two_point_equilibrium),
        ("zero-support CCE certificate, N = 3, T = 2, C = 19", cce_zero_support),
        ("myopic stability, C = 321, k_t <= 8", myopic_stability),
        ("instability, C = 1/2, k_t = 3 + 2t", instability),
        ("learning regime, C_k = 4kT + 1, eta = 0.1", learning_regime),
        ("large-count dominance of action 0, T in {2, 3}", large_count_dominance),
        ("reinforced walk boundedness and product bound", reinforced_walk),
        ("bit-identical reruns", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} {:>2} {name}: {} [{secs:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
