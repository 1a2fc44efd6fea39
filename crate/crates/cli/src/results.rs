use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const HEADER: [&str; 10] =
    ["loss_kind", "lambda", "acc_mean", "acc_std", "f1_mean", "f1_std", "epochs_mean", "epochs_std", "sil_mean", "sil_std"];

/// Rounds to six significant digits; the result prints and re-parses exactly.
pub fn round6(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Sample mean and standard deviation with the `n − 1` divisor (0 for a single trial).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub loss_kind: String,
    pub lambda: f64,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub epochs_mean: f64,
    pub epochs_std: f64,
    pub sil_mean: f64,
    pub sil_std: f64,
}

/// Per-trial scores of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellScores {
    pub accuracy: Vec<f64>,
    pub micro_f1: Vec<f64>,
    pub epochs: Vec<f64>,
    pub silhouette: Vec<f64>,
}

impl ResultRow {
    /// Aggregates trials; stored values are already rounded for serialisation.
    pub fn from_scores(loss_kind: &str, lambda: f64, s: &CellScores) -> Self {
        let r = |xs: &[f64]| {
            let (m, sd) = mean_std(xs);
            (round6(m), round6(sd))
        };
        let (acc_mean, acc_std) = r(&s.accuracy);
        let (f1_mean, f1_std) = r(&s.micro_f1);
        let (epochs_mean, epochs_std) = r(&s.epochs);
        let (sil_mean, sil_std) = r(&s.silhouette);
        ResultRow {
            loss_kind: loss_kind.to_string(),
            lambda: round6(lambda),
            acc_mean,
            acc_std,
            f1_mean,
            f1_std,
            epochs_mean,
            epochs_std,
            sil_mean,
            sil_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(HEADER).map_err(runtime)?;
        for r in &self.rows {
            let nums = [r.lambda, r.acc_mean, r.acc_std, r.f1_mean, r.f1_std, r.epochs_mean, r.epochs_std, r.sil_mean, r.sil_std];
            let mut rec = vec![r.loss_kind.clone()];
            rec.extend(nums.iter().map(|x| round6(*x).to_string()));
            w.write_record(&rec).map_err(runtime)?;
        }
        w.flush().map_err(|e| CliError::Runtime(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(invalid)?.clone();
        if header.iter().ne(HEADER) {
            return Err(CliError::Config(format!("unexpected results header: {}", header.iter().collect::<Vec<_>>().join(","))));
        }
        let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>().map_err(invalid)?;
        Ok(ResultsTable { rows })
    }

    /// The first row labelled `baseline`.
    pub fn baseline(&self) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.loss_kind == crate::BASELINE)
    }
}

fn runtime(e: csv::Error) -> CliError {
    CliError::Runtime(e.into())
}

fn invalid(e: csv::Error) -> CliError {
    CliError::Config(format!("malformed results file: {e}"))
}
