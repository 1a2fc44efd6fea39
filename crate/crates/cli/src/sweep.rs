use latent_boost::train::{run_training, DatasetSplit, LossKind, TrialResult};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::results::{CellScores, ResultRow, ResultsTable};
use crate::{CliError, BASELINE};

/// All trials of one (loss kind, λ) setting.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub label: String,
    pub loss_kind: LossKind,
    pub lambda: f64,
    pub trials: Vec<TrialResult>,
}

impl CellRun {
    pub fn scores(&self) -> CellScores {
        let pick = |f: fn(&TrialResult) -> f64| self.trials.iter().map(f).collect();
        CellScores {
            accuracy: pick(|t| t.test_accuracy),
            micro_f1: pick(|t| t.test_micro_f1),
            epochs: pick(|t| t.epochs_used as f64),
            silhouette: pick(|t| t.test_silhouette.mean),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// The λ = 0 baseline first, then each distance setting in configured order.
    pub cells: Vec<CellRun>,
    pub table: ResultsTable,
}

/// Runs every cell of the sweep, trials in parallel on `threads` workers
/// (rayon's default when `None`). Results are reduced in seed order, so the
/// output does not depend on scheduling.
pub fn run_sweep(cfg: &ExperimentConfig, data: &DatasetSplit, threads: Option<usize>) -> Result<SweepOutput, CliError> {
    let lambdas = cfg.sweep.lambdas_with_baseline();
    let mut settings = vec![(BASELINE.to_string(), LossKind::None, 0.0)];
    for &kind in &cfg.sweep.loss_kinds {
        for &l in lambdas.iter().filter(|&&l| l > 0.0) {
            settings.push((kind.to_string(), kind, l));
        }
    }

    let trials = cfg.training.trials as u64;
    let jobs: Vec<(usize, u64)> = (0..settings.len()).flat_map(|c| (0..trials).map(move |t| (c, t))).collect();
    let run = || {
        jobs.par_iter()
            .map(|&(c, t)| {
                let (_, kind, lambda) = &settings[c];
                let tc = cfg.cell(*kind, *lambda);
                run_training(&cfg.model.widths, data, &tc, tc.seed + t)
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Runtime(e.into()))?;
    let results = pool.install(run)?;

    let mut results = results.into_iter();
    let cells: Vec<CellRun> = settings
        .into_iter()
        .map(|(label, loss_kind, lambda)| CellRun {
            label,
            loss_kind,
            lambda,
            trials: results.by_ref().take(trials as usize).collect(),
        })
        .collect();

    // one row per (configured kind, λ); λ = 0 rows all report the shared baseline
    let mut rows = Vec::new();
    for &kind in &cfg.sweep.loss_kinds {
        for &l in &lambdas {
            let cell = if l == 0.0 {
                &cells[0]
            } else {
                cells.iter().find(|c| c.loss_kind == kind && c.lambda == l).expect("cell was scheduled")
            };
            rows.push(ResultRow::from_scores(&cell.label, l, &cell.scores()));
        }
    }
    Ok(SweepOutput { cells, table: ResultsTable { rows } })
}
