use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EwaState, LearningError};
use crate::queue::{counterfactual_costs, sample_late_counts, ModelParams, PureProfile, State};
use crate::rational::to_f64;

/// Memory of one level: its weights, when it was first reached, and how often it was updated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub ewa: EwaState,
    /// Period at which the level was first the active one.
    pub first_visit: u64,
    /// Probability of action 0 at `first_visit`.
    pub first_strategy_zero: f64,
    /// Number of updates made at this level so far.
    pub visits: u64,
}

impl LevelRecord {
    fn new(ewa: EwaState, first_visit: u64) -> Self {
        let first_strategy_zero = ewa.strategy()[0];
        LevelRecord {
            ewa,
            first_visit,
            first_strategy_zero,
            visits: 0,
        }
    }
}

/// One exponential-weights learner per level, where the level is the
/// player's current job count. Only the active level learns; a level reached
/// for the first time starts from a copy of the level it was reached from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlewaState {
    levels: BTreeMap<u64, LevelRecord>,
    current_level: u64,
    eta: f64,
}

impl MlewaState {
    /// Level 1 with uniform weights, active from period 0.
    pub fn new(actions: usize, eta: f64) -> Result<Self, LearningError> {
        Self::starting_at(actions, eta, 1, 0)
    }

    /// Uniform weights at an arbitrary starting level.
    pub fn starting_at(actions: usize, eta: f64, level: u64, period: u64) -> Result<Self, LearningError> {
        if level == 0 {
            return Err(LearningError::LevelMismatch { expected: 1, found: 0 });
        }
        let mut levels = BTreeMap::new();
        levels.insert(level, LevelRecord::new(EwaState::uniform(actions, eta)?, period));
        Ok(MlewaState {
            levels,
            current_level: level,
            eta,
        })
    }

    pub fn current_level(&self) -> u64 {
        self.current_level
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn level(&self, level: u64) -> Option<&LevelRecord> {
        self.levels.get(&level)
    }

    pub fn levels(&self) -> &BTreeMap<u64, LevelRecord> {
        &self.levels
    }

    fn active(&self) -> &LevelRecord {
        &self.levels[&self.current_level]
    }

    pub fn strategy(&self) -> Vec<f64> {
        self.active().ewa.strategy()
    }

    pub fn select_action<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        WeightedIndex::new(self.strategy())
            .expect("strategies are strictly positive")
            .sample(rng)
    }

    /// Updates the active level with the costs of every action against the
    /// realized opponents, then moves to level `own_late + 1`.
    ///
    /// `period` is the index of the period just played.
    pub fn observe(&mut self, period: u64, costs: &[f64], own_late: u64) -> Result<u64, LearningError> {
        let record = self
            .levels
            .get_mut(&self.current_level)
            .expect("current level is always stored");
        record.ewa.update(costs)?;
        record.visits += 1;
        let next = own_late + 1;
        if !self.levels.contains_key(&next) {
            let copy = self.levels[&self.current_level].ewa.clone();
            self.levels.insert(next, LevelRecord::new(copy, period + 1));
        }
        self.current_level = next;
        Ok(next)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub action: usize,
    pub late: u64,
    pub costs: Vec<f64>,
}

/// One period for one learner against fixed opponent actions.
///
/// The learner's slot in `opponents` is overwritten by its own draw. Late
/// counts are sampled for the whole profile and only the learner's is used.
pub fn mlewa_step<R: Rng + ?Sized>(
    ml: &mut MlewaState,
    params: &ModelParams,
    state: &State,
    player: usize,
    opponents: &PureProfile,
    period: u64,
    rng: &mut R,
) -> Result<StepOutcome, LearningError> {
    let count = state.count(player);
    if count != ml.current_level() {
        return Err(LearningError::LevelMismatch {
            expected: ml.current_level(),
            found: count,
        });
    }
    let action = ml.select_action(rng);
    let profile = opponents.with_action(player, action);
    let costs: Vec<f64> = counterfactual_costs(params, state, &profile, player)?
        .iter()
        .map(to_f64)
        .collect();
    let late = sample_late_counts(params, state, &profile, rng)?[player];
    ml.observe(period, &costs, late)?;
    Ok(StepOutcome { action, late, costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::PenaltySchedule;
    use crate::rational::Rational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stays_at_level_one_without_lateness() {
        let mut ml = MlewaState::new(3, 0.1).unwrap();
        let mut plain = EwaState::uniform(3, 0.1).unwrap();
        for t in 0..20 {
            let costs = [1.0 + t as f64, 2.0, 0.5];
            ml.observe(t, &costs, 0).unwrap();
            plain.update(&costs).unwrap();
        }
        assert_eq!(ml.levels().len(), 1);
        assert_eq!(ml.level(1).unwrap().ewa, plain);
        assert_eq!(ml.level(1).unwrap().visits, 20);
    }

    #[test]
    fn new_level_copies_post_update_weights() {
        let mut ml = MlewaState::new(3, 0.1).unwrap();
        ml.observe(0, &[1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(ml.current_level(), 2);
        let two = ml.level(2).unwrap();
        assert_eq!(two.ewa, ml.level(1).unwrap().ewa);
        assert_eq!(two.first_visit, 1);
        assert_eq!(two.visits, 0);
        assert_eq!(two.first_strategy_zero, two.ewa.strategy()[0]);
    }

    #[test]
    fn revisited_level_resumes_its_own_weights() {
        let mut ml = MlewaState::new(3, 0.1).unwrap();
        ml.observe(0, &[1.0, 2.0, 3.0], 1).unwrap();
        ml.observe(1, &[5.0, 0.0, 0.0], 0).unwrap();
        let stored = ml.level(2).unwrap().clone();
        ml.observe(2, &[0.0, 9.0, 9.0], 0).unwrap();
        ml.observe(3, &[0.0, 9.0, 9.0], 1).unwrap();
        assert_eq!(ml.current_level(), 2);
        assert_eq!(ml.level(2).unwrap(), &stored);
        assert_eq!(ml.level(1).unwrap().visits, 3);
    }

    #[test]
    fn step_checks_level_against_count() {
        let params = ModelParams::new(3, 3, PenaltySchedule::constant(Rational::from_integer(10))).unwrap();
        let mut ml = MlewaState::new(3, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let others = PureProfile::new(vec![0, 1, 2]);
        let out = mlewa_step(&mut ml, &params, &State::unit(3), 0, &others, 0, &mut rng).unwrap();
        assert_eq!(out.costs.len(), 3);
        assert_eq!(ml.current_level(), out.late + 1);
        let bad = State::new(vec![2, 1, 1]).unwrap();
        if ml.current_level() == 1 {
            assert!(matches!(
                mlewa_step(&mut ml, &params, &bad, 0, &others, 1, &mut rng),
                Err(LearningError::LevelMismatch { .. })
            ));
        }
    }

    #[test]
    fn snapshot_round_trips_through_json() {
        let mut ml = MlewaState::new(4, 0.1).unwrap();
        ml.observe(0, &[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let text = serde_json::to_string(&ml).unwrap();
        let back: MlewaState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ml);
    }
}
