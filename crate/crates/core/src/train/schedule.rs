//! Reduce-on-plateau learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::trainer::{TrainRunConfig, TrainTrace};

/// Tracks the best loss seen so far; after `patience` consecutive epochs
/// without a strict improvement the rate is divided by `decay_factor`,
/// floored at `min_lr`, and the counter restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    lr: f64,
    initial_lr: f64,
    decays: i32,
    best: f64,
    stale_epochs: usize,
    patience: usize,
    decay_factor: f64,
    min_lr: f64,
}

impl PlateauSchedule {
    pub fn new(cfg: &TrainRunConfig) -> Self {
        Self {
            lr: cfg.initial_lr,
            initial_lr: cfg.initial_lr,
            decays: 0,
            best: f64::INFINITY,
            stale_epochs: 0,
            patience: cfg.patience_epochs,
            decay_factor: cfg.lr_decay_factor,
            min_lr: cfg.min_lr,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds one epoch's loss and returns the rate for the next epoch.
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.stale_epochs = 0;
        } else {
            self.stale_epochs += 1;
            if self.stale_epochs >= self.patience {
                // derived from the decay count so repeated division cannot drift
                self.decays += 1;
                let next = self.initial_lr / self.decay_factor.powi(self.decays);
                self.lr = if next <= self.min_lr * (1.0 + 1e-9) { self.min_lr } else { next };
                self.stale_epochs = 0;
            }
        }
        self.lr
    }
}

/// Learning rate after replaying every epoch loss in `trace` through the
/// schedule. `current_lr` must be the rate the trace ended with; it is only
/// used when the trace is empty.
pub fn lr_schedule_update(trace: &TrainTrace, current_lr: f64, cfg: &TrainRunConfig) -> f64 {
    if trace.epoch_losses.is_empty() {
        return current_lr;
    }
    let mut s = PlateauSchedule::new(cfg);
    for &loss in &trace.epoch_losses {
        s.observe(loss);
    }
    s.lr()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(losses: &[f64]) -> TrainTrace {
        TrainTrace {
            epoch_losses: losses.to_vec(),
            ..Default::default()
        }
    }

    #[test]
    fn decreasing_loss_keeps_rate() {
        let cfg = TrainRunConfig::default();
        let losses: Vec<f64> = (0..50).map(|i| 5.0 - 0.05 * i as f64).collect();
        assert_eq!(lr_schedule_update(&trace(&losses), 3e-2, &cfg), 3e-2);
    }

    #[test]
    fn ten_stale_epochs_divide_by_ten() {
        let cfg = TrainRunConfig::default();
        let mut losses = vec![1.0];
        losses.extend(std::iter::repeat_n(1.0, 9));
        assert_eq!(lr_schedule_update(&trace(&losses), 3e-2, &cfg), 3e-2);
        losses.push(1.5);
        let lr = lr_schedule_update(&trace(&losses), 3e-2, &cfg);
        assert!((lr - 3e-3).abs() < 1e-18);
    }

    #[test]
    fn repeated_plateaus_floor_at_min_lr() {
        let cfg = TrainRunConfig::default();
        let mut s = PlateauSchedule::new(&cfg);
        s.observe(1.0);
        let mut seen = vec![s.lr()];
        for _ in 0..200 {
            let lr = s.observe(2.0);
            if *seen.last().unwrap() != lr {
                seen.push(lr);
            }
        }
        assert_eq!(seen.len(), 4);
        assert_eq!(s.lr(), cfg.min_lr);
        assert!(s.lr() > 0.0);
        for w in seen.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn improvement_resets_counter() {
        let cfg = TrainRunConfig::default();
        let mut s = PlateauSchedule::new(&cfg);
        s.observe(1.0);
        for _ in 0..9 {
            s.observe(1.0);
        }
        s.observe(0.5);
        for _ in 0..9 {
            s.observe(0.7);
        }
        assert_eq!(s.lr(), 3e-2);
    }
}
