//! Desk-scale supervised training with a composite objective.

pub mod config;
pub mod data;
pub mod idx;
pub mod model;
pub mod stopping;
pub mod trainer;

pub use config::{LossKind, TrainConfig};
pub use data::{generate_blobs, Dataset, DatasetSplit, Role, SyntheticBlobSpec};
pub use idx::load_idx;
pub use model::{Forward, MlpModel};
pub use stopping::{EarlyStopper, PlateauScheduler};
pub use trainer::{evaluate, run_training, run_trials, train_epoch, BatchRecord, EpochReport, EpochStats, TrialResult};
