use nalgebra::DMatrix;
use serde::Serialize;

use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

/// Principal directions fitted on one batch.
///
/// `components` holds the `selected_dim` leading right-singular vectors as
/// rows (d′×d). Singular values are sorted non-increasing and cover all
/// `min(N, d)` directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaProjection {
    pub components: Tensor,
    pub singular_values: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub selected_dim: usize,
    pub threshold: f64,
    pub mean_vector: Vec<f64>,
    /// Set when the batch had no variance at all.
    pub degenerate: bool,
}

/// Smallest `i` whose cumulative explained-variance ratio reaches `threshold`,
/// or `singular_values.len()` when none does.
///
/// The `S²/(m−1)` normalisation cancels in the ratio, so it is computed from `S²` directly.
pub fn select_dim(singular_values: &[f64], threshold: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let max_dim = singular_values.len();
    if total == 0.0 {
        return 1;
    }
    let mut cum = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        cum += s * s;
        if cum / total >= threshold {
            return i + 1;
        }
    }
    max_dim
}

/// Centres `latents` (N×d) and keeps the leading components reaching `threshold`.
pub fn fit_pca(latents: &Tensor, threshold: f64) -> Result<PcaProjection> {
    if latents.shape().len() != 2 {
        return Err(Error::InvalidInput(format!("expected N×d latents, got {:?}", latents.shape())));
    }
    let (n, d) = (latents.rows(), latents.cols());
    if n < 2 {
        return Err(Error::InvalidInput(format!("PCA needs at least 2 samples, got {n}")));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("PCA threshold {threshold} outside (0, 1]")));
    }

    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(latents.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| latents.row(i)[j] - mean[j]);

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();

    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let degenerate = total == 0.0;
    let explained_variance_ratio = if degenerate {
        log::warn!("PCA input has zero variance; keeping a single direction");
        vec![0.0; singular_values.len()]
    } else {
        singular_values.iter().map(|s| s * s / total).collect()
    };
    let selected_dim = select_dim(&singular_values, threshold);

    let mut rows = Vec::with_capacity(selected_dim);
    for &k in &order[..selected_dim] {
        rows.push((0..d).map(|j| v_t[(k, j)]).collect::<Vec<f64>>());
    }
    Ok(PcaProjection {
        components: Tensor::from_rows(&rows)?,
        singular_values,
        explained_variance_ratio,
        selected_dim,
        threshold,
        mean_vector: mean,
        degenerate,
    })
}

impl PcaProjection {
    /// A projection that leaves vectors unchanged (no centring, identity basis).
    pub fn identity(d: usize) -> Result<Self> {
        Ok(PcaProjection {
            components: Tensor::identity(d)?,
            singular_values: vec![1.0; d],
            explained_variance_ratio: vec![1.0 / d as f64; d],
            selected_dim: d,
            threshold: 1.0,
            mean_vector: vec![0.0; d],
            degenerate: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean_vector.len()
    }

    /// `(v − mean)·Wᵀ` for every row of `vectors`.
    pub fn project(&self, vectors: &Tensor) -> Result<Tensor> {
        let d = self.input_dim();
        if vectors.cols() != d {
            return Err(Error::InvalidInput(format!(
                "projection expects width {d}, got {:?}",
                vectors.shape()
            )));
        }
        let mut out = Vec::with_capacity(vectors.rows() * self.selected_dim);
        for i in 0..vectors.rows() {
            let v = vectors.row(i);
            for k in 0..self.selected_dim {
                let w = self.components.row(k);
                out.push(v.iter().zip(&self.mean_vector).zip(w).map(|((x, m), w)| (x - m) * w).sum());
            }
        }
        Ok(Tensor::matrix(vectors.rows(), self.selected_dim, out)?)
    }

    /// Differentiable projection of N×d latents with W and the mean held constant.
    pub fn project_on_tape(&self, tape: &mut Tape, latents: Var) -> Result<Var> {
        let d = self.input_dim();
        if tape.value(latents).cols() != d {
            return Err(Error::InvalidInput(format!(
                "projection expects width {d}, got {:?}",
                tape.value(latents).shape()
            )));
        }
        let w_t = tape.constant(self.components.transpose()?);
        let offset: Vec<f64> = (0..self.selected_dim)
            .map(|k| -self.components.row(k).iter().zip(&self.mean_vector).map(|(w, m)| w * m).sum::<f64>())
            .collect();
        let offset = tape.constant(Tensor::vector(offset)?);
        let projected = tape.matmul(latents, w_t)?;
        Ok(tape.add_row(projected, offset)?)
    }
}
