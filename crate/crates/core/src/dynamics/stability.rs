use serde::Serialize;

use super::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub max_total: u64,
    /// First period at which the maximum is reached; `horizon` is the final state.
    pub argmax_period: u64,
    pub bound: Option<u64>,
    pub bound_violated: bool,
    pub first_violation: Option<u64>,
    pub first_half_max: u64,
    pub second_half_max: u64,
    /// `second_half_max - first_half_max`.
    pub trend: i64,
}

/// Maximum job count, bound violations and first-half versus second-half maxima.
///
/// Periods `t < horizon / 2` form the first half; the state after the last
/// period belongs to the second.
pub fn stability_report(traj: &Trajectory, bound: Option<u64>) -> StabilityReport {
    let totals = traj.totals();
    let half = traj.periods.len() / 2;
    let mut max_total = 0;
    let mut argmax_period = 0;
    for (t, &k) in totals.iter().enumerate() {
        if k > max_total {
            max_total = k;
            argmax_period = t as u64;
        }
    }
    let first_violation = bound.and_then(|b| totals.iter().position(|&k| k > b)).map(|t| t as u64);
    let first_half_max = totals[..half].iter().copied().max().unwrap_or(0);
    let second_half_max = totals[half..].iter().copied().max().unwrap_or(0);
    StabilityReport {
        max_total,
        argmax_period,
        bound,
        bound_violated: first_violation.is_some(),
        first_violation,
        first_half_max,
        second_half_max,
        trend: second_half_max as i64 - first_half_max as i64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run, PolicyKind, RunOptions};
    use crate::queue::{ModelParams, PenaltySchedule};
    use crate::rational::Rational;

    #[test]
    fn linear_growth_violates_any_bound() {
        let p = ModelParams::new(3, 5, PenaltySchedule::constant(Rational::new(1, 2))).unwrap();
        let out = run(&p, &PolicyKind::LastSlot, 10, 0, &RunOptions::default()).unwrap();
        let report = stability_report(&out.trajectory, Some(8));
        assert_eq!(report.max_total, 23);
        assert_eq!(report.argmax_period, 10);
        assert_eq!(report.first_violation, Some(3));
        assert_eq!(report.trend, 23 - 11);
        assert_eq!(report.first_half_max, out.summary.first_half_max);
        assert_eq!(report.second_half_max, out.summary.second_half_max);
    }

    #[test]
    fn constant_run_has_no_trend() {
        let p = ModelParams::new(3, 5, PenaltySchedule::constant(Rational::from_integer(1))).unwrap();
        let out = run(&p, &PolicyKind::AllZero, 10, 0, &RunOptions::default()).unwrap();
        let report = stability_report(&out.trajectory, Some(3));
        assert!(!report.bound_violated);
        assert_eq!(report.trend, 0);
    }
}
