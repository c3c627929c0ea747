use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::QueueError;
use crate::rational::{format_rational, Rational};

/// Per-late-job penalty as a function of the total number of jobs `k` in the system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySchedule {
    Constant {
        #[serde(with = "crate::rational")]
        value: Rational,
    },
    /// `slope * k + intercept`.
    Linear {
        #[serde(with = "crate::rational")]
        slope: Rational,
        #[serde(with = "crate::rational")]
        intercept: Rational,
    },
    /// Step function: the value of the last step whose `from` is at most `k`.
    Threshold { steps: Vec<ThresholdStep> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdStep {
    pub from: u64,
    #[serde(with = "crate::rational")]
    pub value: Rational,
}

impl PenaltySchedule {
    pub fn constant(value: Rational) -> Self {
        PenaltySchedule::Constant { value }
    }

    pub fn linear(slope: Rational, intercept: Rational) -> Self {
        PenaltySchedule::Linear { slope, intercept }
    }

    /// `4 * period * k + 1`, the smallest integer-coefficient schedule meeting the
    /// large-count domination condition `C_k > 4 k T` at every `k`.
    pub fn learning_default(period: usize) -> Self {
        PenaltySchedule::Linear {
            slope: Rational::from_integer(4 * period as i64),
            intercept: Rational::from_integer(1),
        }
    }

    pub fn validate(&self) -> Result<(), QueueError> {
        let negative = |v: &Rational| v.is_negative();
        match self {
            PenaltySchedule::Constant { value } if negative(value) => {
                Err(QueueError::NegativePenalty(format_rational(value)))
            }
            PenaltySchedule::Linear { slope, intercept } => {
                if negative(slope) {
                    Err(QueueError::NegativePenalty(format!("slope {}", format_rational(slope))))
                } else if negative(intercept) {
                    Err(QueueError::NegativePenalty(format!(
                        "intercept {}",
                        format_rational(intercept)
                    )))
                } else {
                    Ok(())
                }
            }
            PenaltySchedule::Threshold { steps } => {
                match steps.first() {
                    None => return Err(QueueError::InvalidThresholdTable("table is empty".into())),
                    Some(first) if first.from != 0 => {
                        return Err(QueueError::InvalidThresholdTable(
                            "first step must start at k = 0".into(),
                        ))
                    }
                    _ => {}
                }
                if steps.windows(2).any(|w| w[0].from >= w[1].from) {
                    return Err(QueueError::InvalidThresholdTable(
                        "step thresholds must be strictly increasing".into(),
                    ));
                }
                match steps.iter().find(|s| negative(&s.value)) {
                    Some(s) => Err(QueueError::NegativePenalty(format_rational(&s.value))),
                    None => Ok(()),
                }
            }
            PenaltySchedule::Constant { .. } => Ok(()),
        }
    }

    /// Penalty charged per late job when the period starts with `k` jobs.
    pub fn at(&self, k: u64) -> Rational {
        match self {
            PenaltySchedule::Constant { value } => *value,
            PenaltySchedule::Linear { slope, intercept } => *slope * Rational::from_integer(k as i64) + *intercept,
            PenaltySchedule::Threshold { steps } => steps
                .iter()
                .take_while(|s| s.from <= k)
                .last()
                .map(|s| s.value)
                .unwrap_or_else(Rational::zero),
        }
    }

    /// Whether `C_k > slope * k` holds for every `k >= 1`.
    pub fn dominates_line(&self, slope: Rational) -> bool {
        match self {
            PenaltySchedule::Linear { slope: own, intercept } => {
                *own >= slope && *own - slope + *intercept > Rational::zero()
            }
            // A bounded schedule is eventually overtaken by any positive line.
            PenaltySchedule::Constant { .. } | PenaltySchedule::Threshold { .. } => {
                if slope > Rational::zero() {
                    false
                } else if slope < Rational::zero() {
                    true
                } else {
                    self.infimum() > Rational::zero()
                }
            }
        }
    }

    /// Infimum of the schedule over all `k >= 0`.
    pub fn infimum(&self) -> Rational {
        match self {
            PenaltySchedule::Constant { value } => *value,
            PenaltySchedule::Linear { intercept, .. } => *intercept,
            PenaltySchedule::Threshold { steps } => steps.iter().map(|s| s.value).min().unwrap_or_else(Rational::zero),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PenaltySchedule::Constant { value } => format!("constant {}", format_rational(value)),
            PenaltySchedule::Linear { slope, intercept } => {
                format!("linear {}*k+{}", format_rational(slope), format_rational(intercept))
            }
            PenaltySchedule::Threshold { steps } => {
                let parts: Vec<String> = steps
                    .iter()
                    .map(|s| format!("{}:{}", s.from, format_rational(&s.value)))
                    .collect();
                format!("threshold {}", parts.join(","))
            }
        }
    }
}

/// Constants of one queueing game: players, period length and penalty schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    players: usize,
    period: usize,
    penalty: PenaltySchedule,
    #[serde(default)]
    allow_short_period: bool,
}

impl ModelParams {
    /// Requires at least three players and `period >= players`.
    pub fn new(players: usize, period: usize, penalty: PenaltySchedule) -> Result<Self, QueueError> {
        Self::build(players, period, penalty, false)
    }

    /// Same as [`ModelParams::new`] but accepts `period < players`, which no
    /// strategy profile can keep stable. Used by the instability and certificate presets.
    pub fn with_short_period(players: usize, period: usize, penalty: PenaltySchedule) -> Result<Self, QueueError> {
        Self::build(players, period, penalty, true)
    }

    pub fn build(
        players: usize,
        period: usize,
        penalty: PenaltySchedule,
        allow_short_period: bool,
    ) -> Result<Self, QueueError> {
        if players < 3 {
            return Err(QueueError::TooFewPlayers(players));
        }
        if period == 0 {
            return Err(QueueError::EmptyPeriod);
        }
        if period < players && !allow_short_period {
            return Err(QueueError::PeriodShorterThanPlayers { players, period });
        }
        penalty.validate()?;
        Ok(ModelParams {
            players,
            period,
            penalty,
            allow_short_period,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn penalty(&self) -> &PenaltySchedule {
        &self.penalty
    }

    pub fn allows_short_period(&self) -> bool {
        self.allow_short_period
    }

    pub fn penalty_at(&self, total: u64) -> Rational {
        self.penalty.at(total)
    }

    pub fn check_state(&self, state: &State) -> Result<(), QueueError> {
        if state.players() != self.players {
            return Err(QueueError::DimensionMismatch {
                expected: self.players,
                found: state.players(),
            });
        }
        Ok(())
    }

    pub fn check_profile(&self, profile: &PureProfile) -> Result<(), QueueError> {
        if profile.len() != self.players {
            return Err(QueueError::DimensionMismatch {
                expected: self.players,
                found: profile.len(),
            });
        }
        if let Some((player, &action)) = profile.actions().iter().enumerate().find(|(_, &a)| a >= self.period) {
            return Err(QueueError::ActionOutOfRange {
                player,
                action,
                period: self.period,
            });
        }
        Ok(())
    }

    pub fn check_mixed(&self, mixed: &MixedProfile) -> Result<(), QueueError> {
        if mixed.players() != self.players {
            return Err(QueueError::DimensionMismatch {
                expected: self.players,
                found: mixed.players(),
            });
        }
        if let Some(player) = mixed.strategies().iter().position(|s| s.len() != self.period) {
            return Err(QueueError::DimensionMismatch {
                expected: self.period,
                found: mixed.strategy(player).len(),
            });
        }
        Ok(())
    }
}

/// Job counts held by each player at the start of a period.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct State {
    counts: Vec<u64>,
}

impl State {
    pub fn new(counts: Vec<u64>) -> Result<Self, QueueError> {
        if counts.is_empty() {
            return Err(QueueError::EmptyState);
        }
        Ok(State { counts })
    }

    /// Every player holds exactly one job.
    pub fn unit(players: usize) -> Self {
        State {
            counts: vec![1; players],
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, player: usize) -> u64 {
        self.counts[player]
    }

    pub fn players(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_unit(&self) -> bool {
        self.counts.iter().all(|&c| c == 1)
    }
}

/// Joining time of every player's jobs, each in `0..period`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PureProfile(Vec<usize>);

impl PureProfile {
    pub fn new(actions: Vec<usize>) -> Self {
        PureProfile(actions)
    }

    pub fn uniform(players: usize, action: usize) -> Self {
        PureProfile(vec![action; players])
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn action(&self, player: usize) -> usize {
        self.0[player]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy of the profile with `player` switched to `action`.
    pub fn with_action(&self, player: usize, action: usize) -> Self {
        let mut actions = self.0.clone();
        actions[player] = action;
        PureProfile(actions)
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }
}

pub const DISTRIBUTION_TOLERANCE: f64 = 1e-12;

/// One probability vector over joining times per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedProfile(Vec<Vec<f64>>);

impl MixedProfile {
    pub fn new(strategies: Vec<Vec<f64>>) -> Result<Self, QueueError> {
        for (player, s) in strategies.iter().enumerate() {
            if s.is_empty() || s.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(QueueError::InvalidDistribution {
                    player,
                    reason: "entries must be finite and nonnegative".into(),
                });
            }
            let sum: f64 = s.iter().sum();
            if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
                return Err(QueueError::InvalidDistribution {
                    player,
                    reason: format!("entries sum to {sum}"),
                });
            }
        }
        Ok(MixedProfile(strategies))
    }

    /// Point masses on the actions of `profile`.
    pub fn pure(profile: &PureProfile, period: usize) -> Self {
        MixedProfile(
            profile
                .actions()
                .iter()
                .map(|&a| {
                    let mut s = vec![0.0; period];
                    s[a] = 1.0;
                    s
                })
                .collect(),
        )
    }

    pub fn symmetric(players: usize, strategy: Vec<f64>) -> Result<Self, QueueError> {
        MixedProfile::new(vec![strategy; players])
    }

    pub fn strategies(&self) -> &[Vec<f64>] {
        &self.0
    }

    pub fn strategy(&self, player: usize) -> &[f64] {
        &self.0[player]
    }

    pub fn players(&self) -> usize {
        self.0.len()
    }

    /// Actions played with positive probability by `player`.
    pub fn support(&self, player: usize) -> Vec<usize> {
        self.0[player]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(a, _)| a)
            .collect()
    }

    /// The pure profile if every player uses a point mass.
    pub fn as_pure(&self) -> Option<PureProfile> {
        self.0
            .iter()
            .map(|s| {
                let support: Vec<usize> = s.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(a, _)| a).collect();
                (support.len() == 1).then(|| support[0])
            })
            .collect::<Option<Vec<_>>>()
            .map(PureProfile)
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn params_enforce_player_and_period_assumptions() {
        let c = PenaltySchedule::constant(r(10));
        assert!(matches!(
            ModelParams::new(2, 5, c.clone()),
            Err(QueueError::TooFewPlayers(2))
        ));
        assert!(matches!(
            ModelParams::new(3, 2, c.clone()),
            Err(QueueError::PeriodShorterThanPlayers { .. })
        ));
        let short = ModelParams::with_short_period(3, 2, c.clone()).unwrap();
        assert!(short.allows_short_period());
        assert!(ModelParams::new(3, 3, c).is_ok());
    }

    #[test]
    fn schedules_evaluate_and_validate() {
        let lin = PenaltySchedule::learning_default(5);
        assert_eq!(lin.at(3), r(61));
        assert!(lin.dominates_line(r(20)));
        assert!(!PenaltySchedule::linear(r(19), r(100)).dominates_line(r(20)));
        assert!(!PenaltySchedule::constant(r(10_000)).dominates_line(r(20)));

        let table = PenaltySchedule::Threshold {
            steps: vec![
                ThresholdStep { from: 0, value: r(2) },
                ThresholdStep { from: 5, value: r(7) },
            ],
        };
        table.validate().unwrap();
        assert_eq!(table.at(4), r(2));
        assert_eq!(table.at(5), r(7));
        assert_eq!(table.at(500), r(7));
        assert_eq!(table.infimum(), r(2));

        let bad = PenaltySchedule::linear(r(-1), r(0));
        assert!(matches!(bad.validate(), Err(QueueError::NegativePenalty(_))));
        let unsorted = PenaltySchedule::Threshold {
            steps: vec![
                ThresholdStep { from: 0, value: r(2) },
                ThresholdStep { from: 0, value: r(3) },
            ],
        };
        assert!(unsorted.validate().is_err());
    }

    #[test]
    fn mixed_profiles_reject_bad_vectors() {
        assert!(MixedProfile::new(vec![vec![0.5, 0.5]]).is_ok());
        assert!(MixedProfile::new(vec![vec![0.6, 0.5]]).is_err());
        assert!(MixedProfile::new(vec![vec![1.5, -0.5]]).is_err());
        let pure = MixedProfile::pure(&PureProfile::new(vec![1, 0]), 3);
        assert_eq!(pure.as_pure(), Some(PureProfile::new(vec![1, 0])));
        assert_eq!(pure.support(0), vec![1]);
    }
}
