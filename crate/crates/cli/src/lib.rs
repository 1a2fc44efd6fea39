//! Config-driven λ and loss-kind sweeps over the metric-regularized trainer.

pub mod config;
pub mod output;
pub mod report;
pub mod results;
pub mod sweep;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::ExperimentConfig;
pub use results::{ResultRow, ResultsTable};
pub use sweep::{run_sweep, SweepOutput};

/// Row label of the λ = 0 cross-entropy-only runs.
pub const BASELINE: &str = "baseline";

/// Environment variable overriding the configured training seed.
pub const SEED_ENV: &str = "LB_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<latent_boost::Error> for CliError {
    fn from(e: latent_boost::Error) -> Self {
        match e {
            latent_boost::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.into()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Replaces the training seed when set.
    pub seed: Option<u64>,
}

/// Reads `LB_SEED` if present.
pub fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not a seed"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("{SEED_ENV}: {e}"))),
    }
}

/// Loads, validates and runs the sweep in `config_path`, then writes all outputs.
/// Returns the directory written to.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<(PathBuf, SweepOutput), CliError> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.training.seed = seed;
    }
    cfg.validate()?;
    if opts.threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let data = cfg.load_data(base)?;
    let out_dir = opts.out.clone().unwrap_or_else(|| cfg.output_dir.clone());

    log::info!(
        "{} train / {} validation / {} test samples; {} trials per cell",
        data.train.len(),
        data.validation.len(),
        data.test.len(),
        cfg.training.trials
    );
    let sweep = run_sweep(&cfg, &data, opts.threads)?;
    output::write_all(&out_dir, &sweep, &data)?;
    Ok((out_dir, sweep))
}
