use serde::{Deserialize, Serialize};

use super::LearningError;

/// Exponential weights over `0..T`, stored as log-weights.
///
/// After every update the log-weights are shifted so that the largest is 0;
/// the strategy is unaffected and the values stay bounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwaState {
    log_weights: Vec<f64>,
    eta: f64,
}

impl EwaState {
    pub fn uniform(actions: usize, eta: f64) -> Result<Self, LearningError> {
        Self::from_log_weights(vec![0.0; actions], eta)
    }

    pub fn from_log_weights(log_weights: Vec<f64>, eta: f64) -> Result<Self, LearningError> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(LearningError::InvalidEta(eta));
        }
        if log_weights.is_empty() {
            return Err(LearningError::DimensionMismatch { expected: 1, found: 0 });
        }
        if let Some(bad) = log_weights.iter().find(|w| !w.is_finite()) {
            return Err(LearningError::NonFinite(*bad));
        }
        Ok(EwaState { log_weights, eta })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn actions(&self) -> usize {
        self.log_weights.len()
    }

    /// Softmax of the log-weights. Entries are floored at the smallest
    /// positive normal float, so no action ever has probability zero.
    pub fn strategy(&self) -> Vec<f64> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut x: Vec<f64> = self.log_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = x.iter().sum();
        for v in &mut x {
            *v = (*v / total).max(f64::MIN_POSITIVE);
        }
        x
    }

    /// `log_w(b) -= eta * cost(b)` for every action.
    pub fn update(&mut self, costs: &[f64]) -> Result<(), LearningError> {
        if costs.len() != self.log_weights.len() {
            return Err(LearningError::DimensionMismatch {
                expected: self.log_weights.len(),
                found: costs.len(),
            });
        }
        if let Some(bad) = costs.iter().find(|c| !c.is_finite()) {
            return Err(LearningError::NonFinite(*bad));
        }
        for (w, c) in self.log_weights.iter_mut().zip(costs) {
            *w -= self.eta * c;
        }
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for w in &mut self.log_weights {
            *w -= max;
        }
        Ok(())
    }
}

pub fn ewa_strategy(ewa: &EwaState) -> Vec<f64> {
    ewa.strategy()
}

pub fn ewa_update(ewa: &EwaState, costs: &[f64]) -> Result<EwaState, LearningError> {
    let mut next = ewa.clone();
    next.update(costs)?;
    Ok(next)
}
