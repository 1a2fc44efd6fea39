use crate::boost::PcaProjection;
use crate::cluster::ClusterStats;
use crate::losses::{clamp_variance, Batch, LossValue};
use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

/// Per-sample Latent Boost terms
///
/// `−log( exp(−‖r′−μ′_own‖²/2σ²_own − α) / Σ_rivals exp(−β·‖r′−μ′_k‖²/2σ²_k) + ε )`
///
/// where `r′` is the batch latent projected through `proj`. The projection,
/// centroids and variances in `stats` (computed in the projected space) are
/// constants; gradients reach the raw latents only through `r′`.
pub fn latent_boost_terms(
    tape: &mut Tape,
    batch: &Batch,
    proj: &PcaProjection,
    stats: &ClusterStats,
    alpha: f64,
    beta: f64,
    epsilon: f64,
) -> Result<Var> {
    if stats.assignment.len() != batch.len() {
        return Err(Error::LengthMismatch(stats.assignment.len(), batch.len()));
    }
    if stats.num_classes() < 2 {
        return Err(Error::DenominatorEmpty);
    }
    if !(epsilon >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidInput(format!("alpha {alpha}, beta {beta}, epsilon {epsilon}")));
    }
    let projected = proj.project_on_tape(tape, batch.latents)?;
    if tape.value(projected).cols() != stats.clusters[0].centroid.len() {
        return Err(Error::InvalidInput("cluster stats were not computed in the projected space".into()));
    }
    let centroids = tape.constant(stats.centroid_matrix()?);
    let variances: Vec<f64> = stats.clusters.iter().map(|c| clamp_variance(c.variance, "cluster")).collect();

    let n = batch.len();
    let own: Vec<(usize, usize)> = stats.assignment.iter().copied().enumerate().collect();
    let own_coef: Vec<f64> = stats.assignment.iter().map(|&k| -1.0 / (2.0 * variances[k])).collect();
    let (mut rivals, mut rival_coef, mut lens) = (Vec::new(), Vec::new(), Vec::with_capacity(n));
    for i in 0..n {
        let before = rivals.len();
        for k in stats.rivals(i) {
            rivals.push((i, k));
            rival_coef.push(-beta / (2.0 * variances[k]));
        }
        lens.push(rivals.len() - before);
    }

    let d_own = tape.pair_sq_dist(projected, centroids, own)?;
    let own_coef = tape.constant(Tensor::vector(own_coef)?);
    let scaled = tape.mul(d_own, own_coef)?;
    let numerator = tape.add_scalar(scaled, -alpha)?;

    let d_rival = tape.pair_sq_dist(projected, centroids, rivals)?;
    let rival_coef = tape.constant(Tensor::vector(rival_coef)?);
    let rival_logits = tape.mul(d_rival, rival_coef)?;
    let log_denominator = tape.segment_log_sum_exp(rival_logits, lens, false)?;

    // log ratio, then −log(exp(·) + ε) evaluated without overflow
    let log_ratio = tape.sub(numerator, log_denominator)?;
    let guarded = tape.log_add_exp_const(log_ratio, epsilon.ln())?;
    Ok(tape.neg(guarded)?)
}

/// Batch mean of [`latent_boost_terms`].
pub fn latent_boost_loss(
    tape: &mut Tape,
    batch: &Batch,
    proj: &PcaProjection,
    stats: &ClusterStats,
    alpha: f64,
    beta: f64,
    epsilon: f64,
) -> Result<LossValue> {
    let terms = latent_boost_terms(tape, batch, proj, stats, alpha, beta, epsilon)?;
    let loss = tape.mean(terms)?;
    LossValue::new(tape, loss)
}
