//! Naive-loop reference implementations and random instance generators.
//!
//! Everything here works on plain `Vec<Vec<f64>>` and recomputes each quantity
//! from its definition without sharing code with the library.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Rows = Vec<Vec<f64>>;

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += a[k] * b[k];
    }
    s
}

pub fn flatten(rows: &Rows) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

/// `n` points in `d` dimensions with labels drawn from `classes`, every class present.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize, classes: usize, spread: f64) -> (Rows, Vec<usize>) {
    let mut labels: Vec<usize> = (0..n).map(|i| if i < classes { i } else { rng.random_range(0..classes) }).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let rows = labels
        .iter()
        .map(|&c| (0..d).map(|k| if k % classes == c { 1.0 } else { 0.0 } + rng.random_range(-spread..spread)).collect())
        .collect();
    (rows, labels)
}

pub fn contrastive(rows: &Rows, labels: &[usize], m_pos: f64, m_neg: f64) -> f64 {
    let n = rows.len();
    let (mut total, mut pairs) = (0.0, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i >= j {
                continue;
            }
            let d = dist(&rows[i], &rows[j]);
            let h = if labels[i] == labels[j] { (d - m_pos).max(0.0) } else { (m_neg - d).max(0.0) };
            total += h * h;
            pairs += 1;
        }
    }
    total / (2.0 * pairs as f64)
}

/// Hinge arguments of the contrastive loss, for kink detection.
pub fn contrastive_hinges(rows: &Rows, labels: &[usize], m_pos: f64, m_neg: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let d = dist(&rows[i], &rows[j]);
            out.push(if labels[i] == labels[j] { d - m_pos } else { m_neg - d });
        }
    }
    out
}

pub fn triplet(rows: &Rows, labels: &[usize], margin: f64) -> f64 {
    let args = triplet_hinges(rows, labels, margin);
    args.iter().map(|a| a.max(0.0)).sum::<f64>() / args.len() as f64
}

pub fn triplet_hinges(rows: &Rows, labels: &[usize], margin: f64) -> Vec<f64> {
    let n = rows.len();
    let mut out = Vec::new();
    for a in 0..n {
        for p in 0..n {
            if p == a || labels[p] != labels[a] {
                continue;
            }
            for q in 0..n {
                if labels[q] != labels[a] {
                    out.push(dist(&rows[a], &rows[p]) - dist(&rows[a], &rows[q]) + margin);
                }
            }
        }
    }
    out
}

/// Nearest same-class index, scanning outward and preferring the lower index.
pub fn npair_positive(labels: &[usize], i: usize) -> Option<usize> {
    for off in 1..labels.len() {
        if i >= off && labels[i - off] == labels[i] {
            return Some(i - off);
        }
        if i + off < labels.len() && labels[i + off] == labels[i] {
            return Some(i + off);
        }
    }
    None
}

pub fn npair(rows: &Rows, labels: &[usize]) -> f64 {
    let (mut total, mut anchors) = (0.0, 0usize);
    for i in 0..rows.len() {
        let Some(p) = npair_positive(labels, i) else { continue };
        let mut s = 1.0;
        for j in 0..rows.len() {
            if labels[j] != labels[i] {
                s += (dot(&rows[i], &rows[j]) - dot(&rows[i], &rows[p])).exp();
            }
        }
        total += s.ln();
        anchors += 1;
    }
    total / anchors as f64
}

pub fn class_means(rows: &Rows, labels: &[usize]) -> Vec<(usize, Vec<f64>, usize)> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let d = rows[0].len();
    classes
        .into_iter()
        .map(|c| {
            let mut m = vec![0.0; d];
            let mut count = 0;
            for (r, &l) in rows.iter().zip(labels) {
                if l == c {
                    for k in 0..d {
                        m[k] += r[k];
                    }
                    count += 1;
                }
            }
            for v in m.iter_mut() {
                *v /= count as f64;
            }
            (c, m, count)
        })
        .collect()
}

pub fn variance(points: &[Vec<f64>], centroid: &[f64]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut s = 0.0;
    for p in points {
        s += dist2(p, centroid);
    }
    Some(s / (points.len() - 1) as f64)
}

pub fn pooled_variance(rows: &Rows, labels: &[usize]) -> f64 {
    let means = class_means(rows, labels);
    let mut s = 0.0;
    for (r, &l) in rows.iter().zip(labels) {
        let (_, m, _) = means.iter().find(|(c, _, _)| *c == l).unwrap();
        s += dist2(r, m);
    }
    s / (rows.len() - 1) as f64
}

/// Magnet loss with one cluster per class and the pooled variance.
pub fn magnet(rows: &Rows, labels: &[usize], alpha: f64) -> f64 {
    let means = class_means(rows, labels);
    let s2 = pooled_variance(rows, labels).max(1e-8);
    let mut total = 0.0;
    for (r, &l) in rows.iter().zip(labels) {
        let mut own = 0.0;
        let mut denom = 0.0;
        for (c, m, _) in &means {
            if *c == l {
                own = (-dist2(r, m) / (2.0 * s2) - alpha).exp();
            } else {
                denom += (-dist2(r, m) / (2.0 * s2)).exp();
            }
        }
        total += -(own / denom).ln();
    }
    total / rows.len() as f64
}

/// Latent Boost on already-projected rows with one cluster per class.
pub fn latent_boost(rows: &Rows, labels: &[usize], alpha: f64, beta: f64, eps: f64, pooled: bool) -> f64 {
    let means = class_means(rows, labels);
    let pv = pooled_variance(rows, labels);
    let var_of = |c: usize| -> f64 {
        if pooled {
            return pv.max(1e-8);
        }
        let (_, m, _) = means.iter().find(|(k, _, _)| *k == c).unwrap();
        let members: Vec<Vec<f64>> =
            rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| r.clone()).collect();
        variance(&members, m).unwrap_or(pv).max(1e-8)
    };
    let mut total = 0.0;
    for (r, &l) in rows.iter().zip(labels) {
        let mut own = 0.0;
        let mut denom = 0.0;
        for (c, m, _) in &means {
            let s2 = var_of(*c);
            if *c == l {
                own = (-dist2(r, m) / (2.0 * s2) - alpha).exp();
            } else {
                denom += (-beta * dist2(r, m) / (2.0 * s2)).exp();
            }
        }
        total += -(own / denom + eps).ln();
    }
    total / rows.len() as f64
}

pub fn silhouette(rows: &Rows, labels: &[usize]) -> f64 {
    let n = rows.len();
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let mut total = 0.0;
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if same.is_empty() {
            continue;
        }
        let a = same.iter().map(|&j| dist(&rows[i], &rows[j])).sum::<f64>() / same.len() as f64;
        let mut b = f64::INFINITY;
        for &c in &classes {
            if c == labels[i] {
                continue;
            }
            let other: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            let m = other.iter().map(|&j| dist(&rows[i], &rows[j])).sum::<f64>() / other.len() as f64;
            b = b.min(m);
        }
        let top = a.max(b);
        if top > 0.0 {
            total += (b - a) / top;
        }
    }
    total / n as f64
}

/// Largest index whose cumulative squared-singular-value share first reaches `t`.
pub fn brute_select_dim(sv: &[f64], t: f64) -> usize {
    let total: f64 = sv.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 1;
    }
    for k in 1..=sv.len() {
        let head: f64 = sv[..k].iter().map(|s| s * s).sum();
        if head / total >= t {
            return k;
        }
    }
    sv.len()
}

/// Whether `x` is within `tol` of a hinge kink.
pub fn near_kink(args: &[f64], tol: f64) -> bool {
    args.iter().any(|a| a.abs() < tol)
}
