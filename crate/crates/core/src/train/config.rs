use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::losses::MarginConfig;
use crate::{Error, Result};

/// Distance term mixed into the cross-entropy objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    None,
    Contrast,
    Triplet,
    Npair,
    Magnet,
    LatentBoost,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::None => "none",
            LossKind::Contrast => "contrast",
            LossKind::Triplet => "triplet",
            LossKind::Npair => "npair",
            LossKind::Magnet => "magnet",
            LossKind::LatentBoost => "latent_boost",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => LossKind::None,
            "contrast" => LossKind::Contrast,
            "triplet" => LossKind::Triplet,
            "npair" => LossKind::Npair,
            "magnet" => LossKind::Magnet,
            "latent_boost" => LossKind::LatentBoost,
            other => return Err(Error::Config(format!("unknown loss kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub loss_kind: LossKind,
    pub margins: MarginConfig,
    pub alpha0: f64,
    pub beta0: f64,
    pub pca_threshold: f64,
    pub clusters_per_class: usize,
    /// Leading epochs trained on cross-entropy alone before the distance term starts.
    pub warmup_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub trials: usize,
    /// Set from the model description rather than the training block.
    #[serde(skip)]
    pub dropout_prob: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.5,
            loss_kind: LossKind::LatentBoost,
            margins: MarginConfig::default(),
            alpha0: 1.0,
            beta0: 1.0,
            pca_threshold: 0.95,
            clusters_per_class: 1,
            warmup_epochs: 0,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            plateau_patience: 10,
            plateau_factor: 5.0,
            early_stop_patience: 20,
            seed: 0,
            trials: 5,
            dropout_prob: 0.25,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if self.loss_kind == LossKind::None && self.lambda > 0.0 {
            return bad("loss_kind \"none\" requires lambda = 0".into());
        }
        self.margins.validate()?;
        if !self.alpha0.is_finite() || self.alpha0 < 0.0 || !self.beta0.is_finite() || self.beta0 < 0.0 {
            return bad("alpha0 and beta0 must be finite and non-negative".into());
        }
        if !(self.pca_threshold > 0.0 && self.pca_threshold <= 1.0) {
            return bad(format!("pca_threshold {} outside (0, 1]", self.pca_threshold));
        }
        if self.clusters_per_class == 0 {
            return bad("clusters_per_class must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive".into());
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2".into());
        }
        if self.max_epochs < 1 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.plateau_patience < 1 || self.early_stop_patience < 1 {
            return bad("patience values must be at least 1".into());
        }
        if !(self.plateau_factor > 1.0) {
            return bad("plateau_factor must exceed 1".into());
        }
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return bad(format!("dropout_prob {} outside [0, 1)", self.dropout_prob));
        }
        Ok(())
    }

    /// True when the distance term contributes at `epoch`.
    pub fn distance_active(&self, epoch: usize) -> bool {
        self.lambda > 0.0 && self.loss_kind != LossKind::None && epoch >= self.warmup_epochs
    }
}
