use serde::{Deserialize, Serialize};

use crate::{Error, Result, EPSILON};

/// Epoch-dependent α/β state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub alpha0: f64,
    pub beta0: f64,
    pub epsilon: f64,
    pub epoch: usize,
    pub total_epochs: usize,
}

impl ScheduleState {
    pub fn new(alpha0: f64, beta0: f64, epoch: usize, total_epochs: usize) -> Result<Self> {
        let s = ScheduleState { alpha0, beta0, epsilon: EPSILON, epoch, total_epochs };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_epochs < 1 {
            return Err(Error::Config("total_epochs must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !self.alpha0.is_finite() || !self.beta0.is_finite() {
            return Err(Error::Config("alpha0 and beta0 must be finite".into()));
        }
        Ok(())
    }

    pub fn at_epoch(self, epoch: usize) -> Self {
        ScheduleState { epoch, ..self }
    }

    pub fn alpha(&self) -> f64 {
        alpha_schedule(self)
    }

    pub fn beta(&self) -> f64 {
        beta_schedule(self)
    }
}

/// `α = 1 + α₀·exp(−E / (1.05·E_total))`, decaying from `1 + α₀` toward 1.
pub fn alpha_schedule(s: &ScheduleState) -> f64 {
    1.0 + s.alpha0 * (-(s.epoch as f64) / (1.05 * s.total_epochs as f64)).exp()
}

/// `β = max(β₀·(1 − E / (0.2·E_total)), ε)`: linear decay over the first fifth of training.
pub fn beta_schedule(s: &ScheduleState) -> f64 {
    (s.beta0 * (1.0 - s.epoch as f64 / (0.2 * s.total_epochs as f64))).max(s.epsilon)
}
