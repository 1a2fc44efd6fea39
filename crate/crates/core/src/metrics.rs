//! Classification metrics and silhouette analysis of latent clusters.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_positive: BTreeMap<usize, u64>,
    pub false_positive: BTreeMap<usize, u64>,
    pub false_negative: BTreeMap<usize, u64>,
    pub total: u64,
}

impl ConfusionCounts {
    pub fn from_predictions(preds: &[usize], labels: &[usize]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::LengthMismatch(preds.len(), labels.len()));
        }
        if preds.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut c = ConfusionCounts { total: preds.len() as u64, ..Default::default() };
        for (&p, &l) in preds.iter().zip(labels) {
            if p == l {
                *c.true_positive.entry(l).or_default() += 1;
            } else {
                *c.false_positive.entry(p).or_default() += 1;
                *c.false_negative.entry(l).or_default() += 1;
            }
        }
        Ok(c)
    }

    pub fn sum_tp(&self) -> u64 {
        self.true_positive.values().sum()
    }

    pub fn sum_fp(&self) -> u64 {
        self.false_positive.values().sum()
    }

    pub fn sum_fn(&self) -> u64 {
        self.false_negative.values().sum()
    }
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    let c = ConfusionCounts::from_predictions(preds, labels)?;
    Ok(c.sum_tp() as f64 / c.total as f64)
}

/// `2·ΣTP / (2·ΣTP + ΣFP + ΣFN)` pooled over all classes.
pub fn micro_f1(preds: &[usize], labels: &[usize]) -> Result<f64> {
    let c = ConfusionCounts::from_predictions(preds, labels)?;
    let tp = c.sum_tp();
    let denom = 2 * tp + c.sum_fp() + c.sum_fn();
    // single-label: denom = 2·total, so the ratio reduces to the accuracy fraction
    Ok((2 * tp) as f64 / denom as f64)
}

/// Index of the largest entry in each row.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SilhouetteReport {
    #[serde(skip)]
    pub samples: Vec<f64>,
    pub mean: f64,
    pub per_class: BTreeMap<usize, f64>,
    pub n: usize,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Silhouette `(b − a) / max(a, b)` of every row of `latents`.
///
/// Members of singleton clusters score 0, as do points with `a = b = 0`.
pub fn silhouette_score(latents: &Tensor, labels: &[usize]) -> Result<SilhouetteReport> {
    let n = latents.rows();
    if labels.len() != n {
        return Err(Error::LengthMismatch(labels.len(), n));
    }
    if n < 3 {
        return Err(Error::InvalidInput(format!("silhouette needs at least 3 samples, got {n}")));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidInput("silhouette needs at least 2 classes".into()));
    }
    let slot: BTreeMap<usize, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut sizes = vec![0usize; classes.len()];
    for l in labels {
        sizes[slot[l]] += 1;
    }

    let mut samples = Vec::with_capacity(n);
    let mut sums = vec![0.0; classes.len()];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[slot[&labels[j]]] += euclid(latents.row(i), latents.row(j));
            }
        }
        let own = slot[&labels[i]];
        if sizes[own] < 2 {
            samples.push(0.0);
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..classes.len())
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        samples.push(if m == 0.0 { 0.0 } else { (b - a) / m });
    }

    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut per_class = BTreeMap::new();
    for &c in &classes {
        let (s, k) = samples
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .fold((0.0, 0usize), |(s, k), (v, _)| (s + v, k + 1));
        per_class.insert(c, s / k as f64);
    }
    Ok(SilhouetteReport { samples, mean, per_class, n })
}
