use std::path::{Path, PathBuf};

use latent_boost::train::{
    generate_blobs, load_idx, DatasetSplit, LossKind, Role, SyntheticBlobSpec, TrainConfig,
};
use serde::Deserialize;

use crate::CliError;

/// One experiment: data, model, training defaults and the sweep grid.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Isotropic Gaussian classes with every pair of means `separation` apart.
    Blobs {
        num_classes: usize,
        dim: usize,
        separation: f64,
        #[serde(default = "one")]
        stddev: f64,
        samples_per_class: usize,
        #[serde(default)]
        seed: u64,
    },
    /// IDX image/label files; validation is held out of the training files.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default = "default_validation")]
        validation_fraction: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_validation() -> f64 {
    0.15
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Layer widths from input features to class count.
    pub widths: Vec<usize>,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

fn default_dropout() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub loss_kinds: Vec<LossKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { lambdas: vec![0.5], loss_kinds: vec![LossKind::LatentBoost] }
    }
}

impl SweepConfig {
    /// The λ grid with 0 prepended when absent; every comparison needs the baseline.
    pub fn lambdas_with_baseline(&self) -> Vec<f64> {
        let mut l = self.lambdas.clone();
        if !l.contains(&0.0) {
            l.insert(0, 0.0);
        }
        l
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Training settings for one sweep cell.
    pub fn cell(&self, kind: LossKind, lambda: f64) -> TrainConfig {
        TrainConfig { loss_kind: kind, lambda, dropout_prob: self.model.dropout, ..self.training.clone() }
    }

    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.model.widths.len() < 3 || self.model.widths.contains(&0) {
            return bad(format!("model widths need input, at least one hidden layer and output: {:?}", self.model.widths));
        }
        if self.sweep.loss_kinds.is_empty() {
            return bad("sweep.loss_kinds is empty".into());
        }
        if self.sweep.loss_kinds.contains(&LossKind::None) {
            return bad("loss kind \"none\" is the baseline, which every sweep already includes".into());
        }
        for &l in &self.sweep.lambdas {
            if !(0.0..=1.0).contains(&l) {
                return bad(format!("lambda {l} outside [0, 1]"));
            }
        }
        for &kind in &self.sweep.loss_kinds {
            for l in self.sweep.lambdas_with_baseline() {
                self.cell(kind, l).validate().map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        self.cell(LossKind::None, 0.0).validate().map_err(|e| CliError::Config(e.to_string()))?;
        match &self.dataset {
            DatasetConfig::Blobs { num_classes, dim, .. } => {
                if self.model.widths.first() != Some(dim) || self.model.widths.last() != Some(num_classes) {
                    return bad(format!(
                        "model widths {:?} do not match {dim} features and {num_classes} classes",
                        self.model.widths
                    ));
                }
            }
            DatasetConfig::Idx { validation_fraction, .. } => {
                if !(*validation_fraction > 0.0 && *validation_fraction < 1.0) {
                    return bad(format!("validation_fraction {validation_fraction} outside (0, 1)"));
                }
            }
        }
        Ok(())
    }

    /// Relative IDX paths resolve against `base`, normally the config file's directory.
    pub fn load_data(&self, base: &Path) -> Result<DatasetSplit, CliError> {
        let data = match &self.dataset {
            DatasetConfig::Blobs { num_classes, dim, separation, stddev, samples_per_class, seed } => {
                let spec = SyntheticBlobSpec::separated(*num_classes, *dim, *separation, *stddev, *samples_per_class, *seed)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                generate_blobs(&spec).map_err(|e| CliError::Config(e.to_string()))?
            }
            DatasetConfig::Idx { train_images, train_labels, test_images, test_labels, validation_fraction, seed } => {
                let p = |q: &PathBuf| if q.is_absolute() { q.clone() } else { base.join(q) };
                let pool = load_idx(&p(train_images), &p(train_labels), Role::Train)?;
                let test = load_idx(&p(test_images), &p(test_labels), Role::Test)?;
                DatasetSplit::with_holdout(&pool, test, *validation_fraction, *seed)?
            }
        };
        if self.model.widths.first() != Some(&data.train.dim()) || self.model.widths.last() != Some(&data.num_classes) {
            return Err(CliError::Config(format!(
                "model widths {:?} do not match {} features and {} classes",
                self.model.widths,
                data.train.dim(),
                data.num_classes
            )));
        }
        Ok(data)
    }
}
