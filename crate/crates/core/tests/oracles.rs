mod common;

use common::*;
use latent_boost::boost::{latent_boost_loss, PcaProjection};
use latent_boost::cluster::{cluster_variance, ClusterStats, VarianceMode};
use latent_boost::losses::{contrastive_loss, magnet_loss, npair_loss, triplet_loss, Batch, MarginConfig};
use latent_boost::metrics::silhouette_score;
use latent_boost::tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;
const INSTANCES: u64 = 50;

fn instance(seed: u64) -> (Rows, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=60);
    let d = rng.random_range(1..=6);
    let k = rng.random_range(2..=4.min(n / 2));
    random_instance(&mut rng, n, d, k, 0.8)
}

fn on_tape(rows: &Rows, labels: &[usize]) -> (Tape, Batch) {
    let mut tape = Tape::new();
    let v = tape.param(Tensor::from_rows(rows).unwrap());
    let b = Batch::new(&tape, v, labels.to_vec()).unwrap();
    (tape, b)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * b.abs().max(1.0)
}

#[test]
fn contrastive_matches_pair_loop() {
    let cfg = MarginConfig { contrast_pos_margin: 0.1, contrast_neg_margin: 1.5, ..Default::default() };
    for s in 0..INSTANCES {
        let (rows, labels) = instance(s);
        let (mut t, b) = on_tape(&rows, &labels);
        let got = contrastive_loss(&mut t, &b, &cfg).unwrap().value;
        let want = contrastive(&rows, &labels, 0.1, 1.5);
        assert!(close(got, want), "seed {s}: {got} vs {want}");
    }
}

#[test]
fn triplet_matches_triple_loop() {
    let cfg = MarginConfig { triplet_margin: 0.3, ..Default::default() };
    for s in 0..INSTANCES {
        let (rows, labels) = instance(100 + s);
        let (mut t, b) = on_tape(&rows, &labels);
        let got = triplet_loss(&mut t, &b, &cfg).unwrap().value;
        let want = triplet(&rows, &labels, 0.3);
        assert!(close(got, want), "seed {s}: {got} vs {want}");
    }
}

#[test]
fn npair_matches_anchor_loop() {
    for s in 0..INSTANCES {
        let (rows, labels) = instance(200 + s);
        let (mut t, b) = on_tape(&rows, &labels);
        let got = npair_loss(&mut t, &b).unwrap().value;
        let want = npair(&rows, &labels);
        assert!(close(got, want), "seed {s}: {got} vs {want}");
    }
}

#[test]
fn magnet_matches_centroid_loop() {
    let cfg = MarginConfig { magnet_alpha: 0.7, ..Default::default() };
    for s in 0..INSTANCES {
        let (rows, labels) = instance(300 + s);
        let (mut t, b) = on_tape(&rows, &labels);
        let stats = ClusterStats::compute(t.value(b.latents), &labels, 1, VarianceMode::PerCluster).unwrap();
        let got = magnet_loss(&mut t, &b, &cfg, &stats).unwrap().value;
        let want = magnet(&rows, &labels, 0.7);
        assert!(close(got, want), "seed {s}: {got} vs {want}");
    }
}

#[test]
fn latent_boost_matches_centroid_loop() {
    for s in 0..INSTANCES {
        let (rows, labels) = instance(400 + s);
        let (mut t, b) = on_tape(&rows, &labels);
        let d = rows[0].len();
        let proj = PcaProjection::identity(d).unwrap();
        let stats = ClusterStats::compute(t.value(b.latents), &labels, 1, VarianceMode::PerCluster).unwrap();
        let got = latent_boost_loss(&mut t, &b, &proj, &stats, 1.4, 0.6, 1e-8).unwrap().value;
        let want = latent_boost(&rows, &labels, 1.4, 0.6, 1e-8, false);
        assert!(close(got, want), "seed {s}: {got} vs {want}");
    }
}

#[test]
fn silhouette_matches_pairwise_loop() {
    for s in 0..INSTANCES {
        let (rows, labels) = instance(500 + s);
        let got = silhouette_score(&Tensor::from_rows(&rows).unwrap(), &labels).unwrap().mean;
        let want = silhouette(&rows, &labels);
        assert!(close(got, want), "seed {s}: {got} vs {want}");
    }
}

#[test]
fn cluster_variance_matches_sum_loop() {
    for s in 0..INSTANCES {
        let (rows, labels) = instance(600 + s);
        for (c, mean, _) in class_means(&rows, &labels) {
            let members: Rows = rows.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(r, _)| r.clone()).collect();
            let refs: Vec<&[f64]> = members.iter().map(|r| r.as_slice()).collect();
            let got = cluster_variance(&refs, &mean).unwrap();
            let want = variance(&members, &mean);
            match (got, want) {
                (Some(g), Some(w)) => assert!(close(g, w), "seed {s}: {g} vs {w}"),
                (None, None) => {}
                other => panic!("seed {s}: {other:?}"),
            }
        }
        let stats =
            ClusterStats::compute(&Tensor::from_rows(&rows).unwrap(), &labels, 1, VarianceMode::Pooled).unwrap();
        assert!(close(stats.pooled_variance, pooled_variance(&rows, &labels)));
    }
}
