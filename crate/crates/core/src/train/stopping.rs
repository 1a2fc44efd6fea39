//! Patience-based early stopping and learning-rate plateau reduction.
//!
//! Both monitor validation accuracy and count an epoch as an improvement
//! only when it strictly exceeds the best value seen so far.

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    best: Option<f64>,
    epochs_since_improvement: usize,
    patience: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper { best: None, epochs_since_improvement: 0, patience }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.epochs_since_improvement
    }

    /// Records one epoch; returns true once training should stop.
    pub fn update(&mut self, value: f64) -> bool {
        if self.best.is_none_or(|b| value > b) {
            self.best = Some(value);
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
        }
        self.epochs_since_improvement >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    best: Option<f64>,
    stall: usize,
    patience: usize,
    factor: f64,
}

impl PlateauScheduler {
    pub fn new(patience: usize, factor: f64) -> Self {
        PlateauScheduler { best: None, stall: 0, patience, factor }
    }

    pub fn stall(&self) -> usize {
        self.stall
    }

    /// Records one epoch; divides `lr` by the factor when the stall reaches patience.
    pub fn update(&mut self, value: f64, lr: &mut f64) -> bool {
        if self.best.is_none_or(|b| value > b) {
            self.best = Some(value);
            self.stall = 0;
            return false;
        }
        self.stall += 1;
        if self.stall >= self.patience {
            *lr /= self.factor;
            self.stall = 0;
            return true;
        }
        false
    }
}
