use std::fmt::Write;

use crate::results::{ResultRow, ResultsTable};

/// Signed percentage change of `value` relative to `base`; `None` when `base` is 0.
pub fn improvement(value: f64, base: f64) -> Option<f64> {
    (base != 0.0).then(|| (value - base) / base * 100.0)
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(p) => format!("{p:+.2}%"),
        None => "n/a".into(),
    }
}

fn metrics(r: &ResultRow) -> [f64; 4] {
    [r.acc_mean, r.f1_mean, r.epochs_mean, r.sil_mean]
}

/// Text table of `table`, with improvement columns against the baseline row when one exists.
pub fn render(table: &ResultsTable) -> String {
    let base = table.baseline();
    if base.is_none() {
        log::warn!("no baseline row in results; improvement columns omitted");
    }
    let mut out = String::new();
    let _ = write!(
        out,
        "{:<14} {:>7} {:>19} {:>19} {:>17} {:>19}",
        "loss_kind", "lambda", "accuracy", "micro_f1", "epochs", "silhouette"
    );
    if base.is_some() {
        let _ = write!(out, " {:>9} {:>9} {:>9} {:>9}", "d_acc", "d_f1", "d_epochs", "d_sil");
    }
    out.push('\n');
    for r in &table.rows {
        let _ = write!(
            out,
            "{:<14} {:>7} {:>9.4} ± {:<7.4} {:>9.4} ± {:<7.4} {:>8.2} ± {:<6.2} {:>9.4} ± {:<7.4}",
            r.loss_kind, r.lambda, r.acc_mean, r.acc_std, r.f1_mean, r.f1_std, r.epochs_mean, r.epochs_std, r.sil_mean, r.sil_std
        );
        if let Some(b) = base {
            for (v, bv) in metrics(r).into_iter().zip(metrics(b)) {
                let _ = write!(out, " {:>9}", pct(improvement(v, bv)));
            }
        }
        out.push('\n');
    }
    out
}
