use std::collections::BTreeMap;

use serde::Serialize;

use super::LearningError;

/// Cumulative costs over the periods spent at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRegret {
    pub visits: u64,
    /// Sum of the costs of the actions actually played.
    pub realized: f64,
    /// Sum of the learner's expected costs under its strategy at each visit.
    pub expected: f64,
    /// Sum of each action's cost against the realized opponents.
    pub counterfactual: Vec<f64>,
    /// Largest per-visit spread `max_b cost(b) - min_b cost(b)`.
    pub c_max: f64,
}

impl LevelRegret {
    fn best_fixed(&self) -> f64 {
        self.counterfactual.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_b sum_t (cost(a_t) - cost(b))`.
    pub fn regret(&self) -> f64 {
        self.realized - self.best_fixed()
    }

    /// Same with the played cost replaced by its expectation under the strategy.
    pub fn expected_regret(&self) -> f64 {
        self.expected - self.best_fixed()
    }

    /// Standard exponential-weights bound on the average expected regret:
    /// `ln(A) / (eta m) + eta c_max^2 / 8`.
    pub fn ewa_bound(&self, eta: f64) -> f64 {
        let m = self.visits.max(1) as f64;
        (self.counterfactual.len() as f64).ln() / (eta * m) + eta * self.c_max * self.c_max / 8.0
    }
}

/// Per-level regret bookkeeping for one player.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegretLedger {
    levels: BTreeMap<u64, LevelRegret>,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, level: u64, costs: &[f64], action: usize, strategy: &[f64]) {
        let entry = self.levels.entry(level).or_insert_with(|| LevelRegret {
            visits: 0,
            realized: 0.0,
            expected: 0.0,
            counterfactual: vec![0.0; costs.len()],
            c_max: 0.0,
        });
        entry.visits += 1;
        entry.realized += costs[action];
        entry.expected += strategy.iter().zip(costs).map(|(x, c)| x * c).sum::<f64>();
        for (acc, c) in entry.counterfactual.iter_mut().zip(costs) {
            *acc += c;
        }
        let (lo, hi) = costs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
            (lo.min(c), hi.max(c))
        });
        entry.c_max = entry.c_max.max(hi - lo);
    }

    pub fn level(&self, level: u64) -> Option<&LevelRegret> {
        self.levels.get(&level)
    }

    pub fn levels(&self) -> &BTreeMap<u64, LevelRegret> {
        &self.levels
    }

    /// Level with the most visits; ties go to the lower level.
    pub fn most_visited(&self) -> Option<u64> {
        self.levels
            .iter()
            .max_by(|a, b| a.1.visits.cmp(&b.1.visits).then(b.0.cmp(a.0)))
            .map(|(&c, _)| c)
    }
}

pub fn regret_per_level(ledger: &RegretLedger, level: u64) -> Result<f64, LearningError> {
    ledger
        .level(level)
        .map(LevelRegret::regret)
        .ok_or(LearningError::UnvisitedLevel(level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::EwaState;
    use crate::queue::{counterfactual_costs, ModelParams, PenaltySchedule, PureProfile, State};
    use crate::rational::{to_f64, Rational};
    use rand::distributions::{Distribution, WeightedIndex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn best_action_played_once_has_zero_regret() {
        let mut ledger = RegretLedger::new();
        ledger.record(1, &[3.0, 1.0, 2.0], 1, &[0.2, 0.5, 0.3]);
        assert_eq!(regret_per_level(&ledger, 1).unwrap(), 0.0);
        assert!(matches!(
            regret_per_level(&ledger, 2),
            Err(LearningError::UnvisitedLevel(2))
        ));
    }

    #[test]
    fn constant_costs_have_zero_regret() {
        let mut ledger = RegretLedger::new();
        for a in [0, 2, 1, 1] {
            ledger.record(3, &[4.0, 4.0, 4.0], a, &[0.3, 0.3, 0.4]);
        }
        assert_eq!(regret_per_level(&ledger, 3).unwrap(), 0.0);
        assert_eq!(ledger.level(3).unwrap().c_max, 0.0);
    }

    #[test]
    fn levels_are_kept_apart() {
        let mut ledger = RegretLedger::new();
        ledger.record(1, &[0.0, 5.0], 1, &[0.5, 0.5]);
        ledger.record(2, &[0.0, 5.0], 0, &[0.5, 0.5]);
        ledger.record(2, &[0.0, 5.0], 0, &[0.5, 0.5]);
        assert_eq!(regret_per_level(&ledger, 1).unwrap(), 5.0);
        assert_eq!(regret_per_level(&ledger, 2).unwrap(), 0.0);
        assert_eq!(ledger.most_visited(), Some(2));
    }

    #[test]
    fn frozen_opponents_respect_the_ewa_bound() {
        let params = ModelParams::new(3, 5, PenaltySchedule::constant(Rational::from_integer(12))).unwrap();
        let state = State::unit(3);
        let eta = 0.1;
        let mut ewa = EwaState::uniform(5, eta).unwrap();
        let mut ledger = RegretLedger::new();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let opponents = [PureProfile::new(vec![0, 3, 4]), PureProfile::new(vec![0, 2, 2])];
        for t in 0..2000usize {
            let x = ewa.strategy();
            let a = WeightedIndex::new(&x).unwrap().sample(&mut rng);
            let profile = opponents[t % 2].with_action(0, a);
            let costs: Vec<f64> = counterfactual_costs(&params, &state, &profile, 0)
                .unwrap()
                .iter()
                .map(to_f64)
                .collect();
            ledger.record(1, &costs, a, &x);
            ewa.update(&costs).unwrap();
        }
        let level = ledger.level(1).unwrap();
        let average = level.expected_regret() / level.visits as f64;
        assert!(average <= level.ewa_bound(eta), "{average} > {}", level.ewa_bound(eta));
    }
}
