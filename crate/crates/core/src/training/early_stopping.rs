//! Patience-based early stopping on validation loss.
//!
//! A check improves when its loss is strictly below the best loss seen so
//! far. Training stops once `patience` consecutive checks fail to improve.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Improved,
    NotImproved,
    Stop,
}

#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best_loss: f64,
    best_check: usize,
    checks: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_check: 0,
            checks: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> CheckOutcome {
        self.checks += 1;
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_check = self.checks;
            self.stale = 0;
            CheckOutcome::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                CheckOutcome::Stop
            } else {
                CheckOutcome::NotImproved
            }
        }
    }

    /// 1-based index of the best check so far (0 before any check).
    pub fn best_check(&self) -> usize {
        self.best_check
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn checks(&self) -> usize {
        self.checks
    }
}

/// Outcome of running the stopping rule over a loss sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopSummary {
    /// Checks actually evaluated (the stop check included).
    pub checks_run: usize,
    /// 1-based index of the best check.
    pub best_check: usize,
    pub stopped_early: bool,
}

/// Feeds `losses` through [`EarlyStopping`] until it stops or the sequence ends.
pub fn simulate(losses: &[f64], patience: usize) -> StopSummary {
    let mut rule = EarlyStopping::new(patience);
    for &loss in losses {
        if rule.observe(loss) == CheckOutcome::Stop {
            return StopSummary {
                checks_run: rule.checks(),
                best_check: rule.best_check(),
                stopped_early: true,
            };
        }
    }
    StopSummary {
        checks_run: rule.checks(),
        best_check: rule.best_check(),
        stopped_early: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_traced_sequence() {
        let s = simulate(&[0.70, 0.60, 0.65, 0.66], 2);
        assert_eq!(
            s,
            StopSummary {
                checks_run: 4,
                best_check: 2,
                stopped_early: true
            }
        );
    }

    #[test]
    fn strictly_decreasing_never_stops() {
        let losses: Vec<f64> = (0..16).map(|i| 1.0 - i as f64 * 0.01).collect();
        let s = simulate(&losses, 2);
        assert!(!s.stopped_early);
        assert_eq!((s.checks_run, s.best_check), (16, 16));
    }

    #[test]
    fn equal_loss_does_not_count_as_improvement() {
        let s = simulate(&[0.5, 0.5, 0.5], 2);
        assert_eq!((s.checks_run, s.best_check, s.stopped_early), (3, 1, true));
    }

    #[test]
    fn stale_counter_resets_on_improvement() {
        let s = simulate(&[0.9, 0.95, 0.8, 0.85, 0.7, 0.75, 0.76], 2);
        assert_eq!((s.checks_run, s.best_check, s.stopped_early), (7, 5, true));
    }
}
