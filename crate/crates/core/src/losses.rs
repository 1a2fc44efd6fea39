//! Distance-metric losses over a batch of latent vectors, softmax
//! cross-entropy, and their λ-weighted combination.
//!
//! Pair and triplet sets are enumerated exhaustively: contrastive uses every
//! unordered pair, triplet every `(a, p, n)` with `a ≠ p` sharing a label and
//! `n` of another label, N-pair pairs each anchor with its nearest-index
//! same-class sample and contrasts it with all other-class samples.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterStats;
use crate::tensor::{Tape, Var};
use crate::{Error, Result, EPSILON};

/// Latent rows on a tape plus their class labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub latents: Var,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(tape: &Tape, latents: Var, labels: Vec<usize>) -> Result<Self> {
        let v = tape.value(latents);
        if v.shape().len() != 2 {
            return Err(Error::InvalidInput(format!("latents must be N×d, got {:?}", v.shape())));
        }
        if v.rows() != labels.len() {
            return Err(Error::LengthMismatch(v.rows(), labels.len()));
        }
        Ok(Batch { latents, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        let mut l = self.labels.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarginConfig {
    pub contrast_pos_margin: f64,
    pub contrast_neg_margin: f64,
    pub triplet_margin: f64,
    pub magnet_alpha: f64,
}

impl Default for MarginConfig {
    fn default() -> Self {
        MarginConfig { contrast_pos_margin: 0.0, contrast_neg_margin: 1.0, triplet_margin: 0.05, magnet_alpha: 1.0 }
    }
}

impl MarginConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.contrast_pos_margin, self.contrast_neg_margin, self.triplet_margin, self.magnet_alpha];
        if all.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Config(format!("margins must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// A finite scalar loss recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub var: Var,
    pub value: f64,
}

impl LossValue {
    pub fn new(tape: &Tape, var: Var) -> Result<Self> {
        let t = tape.value(var);
        if !t.is_scalar() {
            return Err(Error::InvalidInput(format!("loss must be scalar, got {:?}", t.shape())));
        }
        Ok(LossValue { var, value: t.item() })
    }
}

/// Index of unordered pair `(i, j)`, `i < j`, in row-major upper-triangle order.
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Euclidean distances for all unordered pairs, in `pair_index` order.
fn all_pair_distances(tape: &mut Tape, latents: Var, n: usize) -> Result<Var> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet);
    }
    let sq = tape.pair_sq_dist(latents, latents, pairs)?;
    Ok(tape.sqrt(sq)?)
}

/// `(1/2P) Σ [y·max(0, d − m⁺)² + (1−y)·max(0, m⁻ − d)²]` over all P unordered pairs.
pub fn contrastive_loss(tape: &mut Tape, batch: &Batch, cfg: &MarginConfig) -> Result<LossValue> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::EmptyPairSet);
    }
    let d = all_pair_distances(tape, batch.latents, n)?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in i + 1..n {
            let k = pair_index(n, i, j);
            if batch.labels[i] == batch.labels[j] {
                pos.push(k);
            } else {
                neg.push(k);
            }
        }
    }
    let num_pairs = (pos.len() + neg.len()) as f64;

    let mut parts = Vec::new();
    if !pos.is_empty() {
        let dp = tape.gather(d, pos)?;
        let shifted = tape.add_scalar(dp, -cfg.contrast_pos_margin)?;
        let hinge = tape.relu(shifted)?;
        let sq = tape.square(hinge)?;
        parts.push(tape.sum(sq)?);
    }
    if !neg.is_empty() {
        let dn = tape.gather(d, neg)?;
        let flipped = tape.neg(dn)?;
        let gap = tape.add_scalar(flipped, cfg.contrast_neg_margin)?;
        let hinge = tape.relu(gap)?;
        let sq = tape.square(hinge)?;
        parts.push(tape.sum(sq)?);
    }
    let total = match parts[..] {
        [a] => a,
        [a, b] => tape.add(a, b)?,
        _ => unreachable!(),
    };
    let loss = tape.scale(total, 1.0 / (2.0 * num_pairs))?;
    LossValue::new(tape, loss)
}

/// `(1/T) Σ max(0, d(a,p) − d(a,n) + m)` over every valid triplet.
pub fn triplet_loss(tape: &mut Tape, batch: &Batch, cfg: &MarginConfig) -> Result<LossValue> {
    let n = batch.len();
    let labels = &batch.labels;
    let (mut ap, mut an) = (Vec::new(), Vec::new());
    for a in 0..n {
        for p in (0..n).filter(|&p| p != a && labels[p] == labels[a]) {
            for neg in (0..n).filter(|&x| labels[x] != labels[a]) {
                ap.push(pair_index(n, a, p));
                an.push(pair_index(n, a, neg));
            }
        }
    }
    if ap.is_empty() {
        return Err(Error::NoTriplets);
    }
    let d = all_pair_distances(tape, batch.latents, n)?;
    let dap = tape.gather(d, ap)?;
    let dan = tape.gather(d, an)?;
    let diff = tape.sub(dap, dan)?;
    let shifted = tape.add_scalar(diff, cfg.triplet_margin)?;
    let hinge = tape.relu(shifted)?;
    let loss = tape.mean(hinge)?;
    LossValue::new(tape, loss)
}

/// Same-class sample closest in batch index to `i` (lower index on ties).
fn nearest_index_positive(labels: &[usize], i: usize) -> Option<usize> {
    (0..labels.len())
        .filter(|&j| j != i && labels[j] == labels[i])
        .min_by_key(|&j| (j.abs_diff(i), j))
}

/// `(1/A) Σ_anchors log(1 + Σ_neg exp(f·f⁻ − f·f⁺))` with dot-product similarity.
pub fn npair_loss(tape: &mut Tape, batch: &Batch) -> Result<LossValue> {
    let n = batch.len();
    let labels = &batch.labels;
    let (mut neg_pairs, mut pos_pairs, mut lens) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let Some(p) = nearest_index_positive(labels, i) else { continue };
        let negs: Vec<usize> = (0..n).filter(|&j| labels[j] != labels[i]).collect();
        lens.push(negs.len());
        for j in negs {
            neg_pairs.push((i, j));
            pos_pairs.push((i, p));
        }
    }
    if lens.is_empty() {
        return Err(Error::NoAnchors);
    }
    if neg_pairs.is_empty() {
        // every anchor contributes log(1) = 0
        let m = tape.mean(batch.latents)?;
        let zero = tape.scale(m, 0.0)?;
        return LossValue::new(tape, zero);
    }
    let sn = tape.pair_dot(batch.latents, batch.latents, neg_pairs)?;
    let sp = tape.pair_dot(batch.latents, batch.latents, pos_pairs)?;
    let x = tape.sub(sn, sp)?;
    let terms = tape.segment_log_sum_exp(x, lens, true)?;
    let loss = tape.mean(terms)?;
    LossValue::new(tape, loss)
}

pub(crate) fn clamp_variance(v: f64, what: &str) -> f64 {
    if v < EPSILON {
        log::warn!("{what} variance {v:e} below epsilon; clamped");
        EPSILON
    } else {
        v
    }
}

/// Per-sample magnet terms `−log(exp(−‖r−μ(r)‖²/2σ² − α) / Σ_rivals exp(−‖r−μ‖²/2σ²))`.
///
/// `stats` is treated as constant; σ² is its pooled within-cluster variance.
pub fn magnet_terms(tape: &mut Tape, batch: &Batch, cfg: &MarginConfig, stats: &ClusterStats) -> Result<Var> {
    if stats.assignment.len() != batch.len() {
        return Err(Error::LengthMismatch(stats.assignment.len(), batch.len()));
    }
    if stats.num_classes() < 2 {
        return Err(Error::DenominatorEmpty);
    }
    let sigma2 = clamp_variance(stats.pooled_variance, "pooled");
    let k = -1.0 / (2.0 * sigma2);
    let centroids = tape.constant(stats.centroid_matrix()?);

    let own: Vec<(usize, usize)> = stats.assignment.iter().copied().enumerate().collect();
    let (mut rivals, mut lens) = (Vec::new(), Vec::new());
    for i in 0..batch.len() {
        let before = rivals.len();
        rivals.extend(stats.rivals(i).map(|c| (i, c)));
        lens.push(rivals.len() - before);
    }

    let d_own = tape.pair_sq_dist(batch.latents, centroids, own)?;
    let scaled = tape.scale(d_own, k)?;
    let numerator = tape.add_scalar(scaled, -cfg.magnet_alpha)?;
    let d_rival = tape.pair_sq_dist(batch.latents, centroids, rivals)?;
    let rival_logits = tape.scale(d_rival, k)?;
    let denominator = tape.segment_log_sum_exp(rival_logits, lens, false)?;
    Ok(tape.sub(denominator, numerator)?)
}

pub fn magnet_loss(tape: &mut Tape, batch: &Batch, cfg: &MarginConfig, stats: &ClusterStats) -> Result<LossValue> {
    let terms = magnet_terms(tape, batch, cfg, stats)?;
    let loss = tape.mean(terms)?;
    LossValue::new(tape, loss)
}

/// Mean softmax cross-entropy of N×C logits.
pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<LossValue> {
    let shape = tape.value(logits).shape().to_vec();
    let classes = match shape[..] {
        [_, c] if c >= 2 => c,
        _ => return Err(Error::InvalidInput(format!("logits must be N×C with C ≥ 2, got {shape:?}"))),
    };
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let loss = tape.softmax_cross_entropy(logits, labels)?;
    LossValue::new(tape, loss)
}

/// `λ·dist + (1 − λ)·ce`.
pub fn weighted_total(tape: &mut Tape, dist: &LossValue, ce: &LossValue, lambda: f64) -> Result<LossValue> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    let a = tape.scale(dist.var, lambda)?;
    let b = tape.scale(ce.var, 1.0 - lambda)?;
    let total = tape.add(a, b)?;
    LossValue::new(tape, total)
}
