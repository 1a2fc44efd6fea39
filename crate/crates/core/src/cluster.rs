//! Per-cluster centroids and variances of a labelled point set.
//!
//! With one cluster per class (the default) every class is a cluster. With
//! `k > 1` each class is split by a deterministic Lloyd iteration seeded with
//! farthest-point initialisation.

use serde::Serialize;

use crate::tensor::Tensor;
use crate::{Error, Result};

/// How the kernel width σ² of each cluster is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMode {
    /// Each cluster uses its own unbiased spread; singletons fall back to the pooled value.
    #[default]
    PerCluster,
    /// Every cluster uses the pooled within-cluster variance of the whole set.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub class_id: usize,
    pub centroid: Vec<f64>,
    pub variance: f64,
    pub count: usize,
    /// True when `variance` is the pooled fallback for a singleton.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterStats {
    pub clusters: Vec<Cluster>,
    /// Index into `clusters` for every input row.
    pub assignment: Vec<usize>,
    /// `(1/(N−1)) Σ ‖r_n − μ(r_n)‖²` over all rows.
    pub pooled_variance: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_of(points: &[&[f64]]) -> Vec<f64> {
    let d = points[0].len();
    let mut m = vec![0.0; d];
    for p in points {
        for (m, x) in m.iter_mut().zip(*p) {
            *m += x;
        }
    }
    let n = points.len() as f64;
    m.iter_mut().for_each(|m| *m /= n);
    m
}

/// Unbiased spread `(1/(|C|−1)) Σ ‖r_i − μ_C‖²` of one cluster.
///
/// Returns `Ok(None)` for a singleton, where the divisor vanishes.
pub fn cluster_variance(points: &[&[f64]], centroid: &[f64]) -> Result<Option<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if points.len() == 1 {
        return Ok(None);
    }
    let ss: f64 = points.iter().map(|p| sq_dist(p, centroid)).sum();
    Ok(Some(ss / (points.len() - 1) as f64))
}

/// Splits `members` (row indices) into at most `k` groups.
fn split_class(points: &Tensor, members: &[usize], k: usize) -> Vec<Vec<usize>> {
    let k = k.min(members.len()).max(1);
    if k == 1 {
        return vec![members.to_vec()];
    }
    let mut centers: Vec<Vec<f64>> = vec![points.row(members[0]).to_vec()];
    while centers.len() < k {
        let far = members
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let da = centers.iter().map(|c| sq_dist(points.row(a), c)).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|c| sq_dist(points.row(b), c)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("non-empty members");
        centers.push(points.row(far).to_vec());
    }
    let mut groups = vec![Vec::new(); k];
    for _ in 0..25 {
        let mut next = vec![Vec::new(); k];
        for &i in members {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(points.row(i), &centers[a]).total_cmp(&sq_dist(points.row(i), &centers[b])))
                .unwrap();
            next[best].push(i);
        }
        for (c, g) in centers.iter_mut().zip(&next) {
            if !g.is_empty() {
                let rows: Vec<&[f64]> = g.iter().map(|&i| points.row(i)).collect();
                *c = mean_of(&rows);
            }
        }
        let done = next == groups;
        groups = next;
        if done {
            break;
        }
    }
    groups.retain(|g| !g.is_empty());
    groups
}

impl ClusterStats {
    /// Computes statistics of `points` (N×d) grouped by `labels`.
    pub fn compute(points: &Tensor, labels: &[usize], clusters_per_class: usize, mode: VarianceMode) -> Result<Self> {
        let n = points.rows();
        if labels.len() != n {
            return Err(Error::LengthMismatch(labels.len(), n));
        }
        if clusters_per_class == 0 {
            return Err(Error::InvalidInput("clusters_per_class must be at least 1".into()));
        }
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();

        let mut clusters = Vec::new();
        let mut assignment = vec![0; n];
        let mut spreads = Vec::new();
        for &class_id in &classes {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == class_id).collect();
            for group in split_class(points, &members, clusters_per_class) {
                let rows: Vec<&[f64]> = group.iter().map(|&i| points.row(i)).collect();
                let centroid = mean_of(&rows);
                spreads.push(cluster_variance(&rows, &centroid)?);
                for &i in &group {
                    assignment[i] = clusters.len();
                }
                clusters.push(Cluster { class_id, centroid, variance: 0.0, count: group.len(), fallback: false });
            }
        }

        let ss: f64 = (0..n).map(|i| sq_dist(points.row(i), &clusters[assignment[i]].centroid)).sum();
        let pooled_variance = if n > 1 { ss / (n - 1) as f64 } else { 0.0 };

        for (c, s) in clusters.iter_mut().zip(spreads) {
            match (mode, s) {
                (VarianceMode::PerCluster, Some(v)) => c.variance = v,
                (VarianceMode::PerCluster, None) => {
                    log::warn!("singleton cluster for class {}; using pooled variance", c.class_id);
                    c.variance = pooled_variance;
                    c.fallback = true;
                }
                (VarianceMode::Pooled, _) => c.variance = pooled_variance,
            }
        }
        Ok(ClusterStats { clusters, assignment, pooled_variance })
    }

    pub fn num_classes(&self) -> usize {
        let mut ids: Vec<usize> = self.clusters.iter().map(|c| c.class_id).collect();
        ids.dedup();
        ids.len()
    }

    pub fn class_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.clusters.iter().map(|c| c.class_id).collect();
        ids.dedup();
        ids
    }

    /// Clusters whose class differs from that of row `i`.
    pub fn rivals(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let own = self.clusters[self.assignment[i]].class_id;
        (0..self.clusters.len()).filter(move |&k| self.clusters[k].class_id != own)
    }

    /// Centroids stacked as a K×d matrix.
    pub fn centroid_matrix(&self) -> Result<Tensor> {
        let rows: Vec<Vec<f64>> = self.clusters.iter().map(|c| c.centroid.clone()).collect();
        Ok(Tensor::from_rows(&rows)?)
    }
}
