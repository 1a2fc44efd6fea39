use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use latent_boost::boost::fit_pca;
use latent_boost::metrics::SilhouetteReport;
use latent_boost::train::{DatasetSplit, EpochStats};
use serde::Serialize;

use crate::sweep::{CellRun, SweepOutput};
use crate::CliError;

#[derive(Serialize)]
struct EpochLine<'a> {
    event: &'static str,
    loss_kind: &'a str,
    lambda: f64,
    trial: usize,
    seed: u64,
    #[serde(flatten)]
    stats: &'a EpochStats,
}

#[derive(Serialize)]
struct TrialLine<'a> {
    event: &'static str,
    loss_kind: &'a str,
    lambda: f64,
    trial: usize,
    seed: u64,
    epochs_used: usize,
    best_epoch: usize,
    best_val_acc: f64,
    test_accuracy: f64,
    test_micro_f1: f64,
    test_silhouette: &'a SilhouetteReport,
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes results.csv, runlog.jsonl and latents_test.csv into `dir`.
pub fn write_all(dir: &Path, sweep: &SweepOutput, data: &DatasetSplit) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut results = create(dir, "results.csv")?;
    sweep.table.write_csv(&mut results)?;
    results.flush().context("writing results.csv")?;
    write_runlog(create(dir, "runlog.jsonl")?, &sweep.cells)?;
    write_latents(create(dir, "latents_test.csv")?, &sweep.cells, data)?;
    Ok(())
}

/// One JSON object per epoch and one per finished trial.
pub fn write_runlog<W: Write>(mut w: W, cells: &[CellRun]) -> anyhow::Result<()> {
    for cell in cells {
        for (trial, t) in cell.trials.iter().enumerate() {
            for stats in &t.history {
                let line =
                    EpochLine { event: "epoch", loss_kind: &cell.label, lambda: cell.lambda, trial, seed: t.seed, stats };
                serde_json::to_writer(&mut w, &line)?;
                w.write_all(b"\n")?;
            }
            let line = TrialLine {
                event: "trial",
                loss_kind: &cell.label,
                lambda: cell.lambda,
                trial,
                seed: t.seed,
                epochs_used: t.epochs_used,
                best_epoch: t.best_epoch,
                best_val_acc: t.best_val_acc,
                test_accuracy: t.test_accuracy,
                test_micro_f1: t.test_micro_f1,
                test_silhouette: &t.test_silhouette,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Test-set latents of every trial with labels, predictions and the two
/// leading principal coordinates for plotting.
pub fn write_latents<W: Write>(w: W, cells: &[CellRun], data: &DatasetSplit) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let dim = cells.first().and_then(|c| c.trials.first()).map_or(0, |t| t.test_latents.cols());
    let mut header: Vec<String> =
        ["loss_kind", "lambda", "seed", "index", "label", "prediction", "pc1", "pc2"].map(String::from).to_vec();
    header.extend((0..dim).map(|k| format!("z{k}")));
    w.write_record(&header)?;
    for cell in cells {
        for t in &cell.trials {
            let pcs = fit_pca(&t.test_latents, 1.0)?.project(&t.test_latents)?;
            for i in 0..t.test_latents.rows() {
                let pc = pcs.row(i);
                let mut rec = vec![
                    cell.label.clone(),
                    cell.lambda.to_string(),
                    t.seed.to_string(),
                    i.to_string(),
                    data.test.labels[i].to_string(),
                    t.test_predictions[i].to_string(),
                    pc[0].to_string(),
                    pc.get(1).copied().unwrap_or(0.0).to_string(),
                ];
                rec.extend(t.test_latents.row(i).iter().map(|x| x.to_string()));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
