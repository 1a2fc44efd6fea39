use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{LossKind, TrainConfig};
use super::data::{Dataset, DatasetSplit, Role};
use super::model::MlpModel;
use super::stopping::{EarlyStopper, PlateauScheduler};
use crate::boost::{fit_pca, latent_boost_loss, ScheduleState};
use crate::cluster::{ClusterStats, VarianceMode};
use crate::losses::{
    contrastive_loss, cross_entropy, magnet_loss, npair_loss, triplet_loss, weighted_total, Batch, LossValue,
};
use crate::metrics::{accuracy, argmax_rows, micro_f1, silhouette_score, SilhouetteReport};
use crate::tensor::{AdamState, Tape, Tensor};
use crate::{Error, Result, EPSILON};

/// Loss components of one optimisation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchRecord {
    pub ce: f64,
    /// `None` when the distance term was inactive or skipped for this batch.
    pub dist: Option<f64>,
    pub total: f64,
}

/// What one pass over the training data produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub batches: Vec<BatchRecord>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Mean selected PCA dimension over Latent Boost batches.
    pub pca_dim: Option<f64>,
    pub skipped_batches: usize,
}

impl EpochReport {
    pub fn mean_ce(&self) -> f64 {
        mean(self.batches.iter().map(|b| b.ce))
    }

    pub fn mean_total(&self) -> f64 {
        mean(self.batches.iter().map(|b| b.total))
    }

    pub fn mean_dist(&self) -> Option<f64> {
        let d: Vec<f64> = self.batches.iter().filter_map(|b| b.dist).collect();
        (!d.is_empty()).then(|| mean(d.into_iter()))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Per-epoch log record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub pca_dim: Option<f64>,
    pub train_ce: f64,
    pub train_dist: Option<f64>,
    pub train_total: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub history: Vec<EpochStats>,
    pub epochs_used: usize,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_accuracy: f64,
    pub test_micro_f1: f64,
    pub test_silhouette: SilhouetteReport,
    pub test_latents: Tensor,
    pub test_predictions: Vec<usize>,
    pub params: Vec<Tensor>,
}

fn is_structural(e: &Error) -> bool {
    matches!(e, Error::EmptyPairSet | Error::NoTriplets | Error::NoAnchors | Error::DenominatorEmpty)
}

struct DistanceTerm {
    loss: LossValue,
    alpha: Option<f64>,
    beta: Option<f64>,
    pca_dim: Option<usize>,
}

fn distance_term(tape: &mut Tape, batch: &Batch, cfg: &TrainConfig, epoch: usize) -> Result<DistanceTerm> {
    let plain = |loss| DistanceTerm { loss, alpha: None, beta: None, pca_dim: None };
    match cfg.loss_kind {
        LossKind::None => Err(Error::Config("no distance loss configured".into())),
        LossKind::Contrast => contrastive_loss(tape, batch, &cfg.margins).map(plain),
        LossKind::Triplet => triplet_loss(tape, batch, &cfg.margins).map(plain),
        LossKind::Npair => npair_loss(tape, batch).map(plain),
        LossKind::Magnet => {
            let stats = ClusterStats::compute(
                tape.value(batch.latents),
                &batch.labels,
                cfg.clusters_per_class,
                VarianceMode::PerCluster,
            )?;
            magnet_loss(tape, batch, &cfg.margins, &stats).map(plain)
        }
        LossKind::LatentBoost => {
            let proj = fit_pca(tape.value(batch.latents), cfg.pca_threshold)?;
            let projected = proj.project(tape.value(batch.latents))?;
            let stats =
                ClusterStats::compute(&projected, &batch.labels, cfg.clusters_per_class, VarianceMode::PerCluster)?;
            let schedule = ScheduleState::new(cfg.alpha0, cfg.beta0, epoch, cfg.max_epochs)?;
            let (alpha, beta) = (schedule.alpha(), schedule.beta());
            let loss = latent_boost_loss(tape, batch, &proj, &stats, alpha, beta, EPSILON)?;
            Ok(DistanceTerm { loss, alpha: Some(alpha), beta: Some(beta), pca_dim: Some(proj.selected_dim) })
        }
    }
}

/// One shuffled pass over `data` with an Adam step per batch.
pub fn train_epoch(
    model: &mut MlpModel,
    adam: &mut AdamState,
    data: &Dataset,
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EpochReport> {
    if data.role != Role::Train {
        return Err(Error::InvalidInput(format!("{:?} data cannot be used for parameter updates", data.role)));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);

    let mut report = EpochReport { batches: Vec::new(), alpha: None, beta: None, pca_dim: None, skipped_batches: 0 };
    let mut dims = Vec::new();
    let active = cfg.distance_active(epoch);
    for chunk in order.chunks(cfg.batch_size) {
        let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
        let mut tape = Tape::new();
        let params = model.register(&mut tape);
        let x = tape.constant(data.features.select_rows(chunk)?);
        let out = model.forward(&mut tape, &params, x, Some(&mut *rng))?;
        let ce = cross_entropy(&mut tape, out.logits, &labels)?;

        let mut dist = None;
        if active {
            let batch = Batch::new(&tape, out.latents, labels)?;
            if batch.num_classes() < 2 {
                log::warn!("epoch {epoch}: single-class batch, distance term skipped");
                report.skipped_batches += 1;
            } else {
                match distance_term(&mut tape, &batch, cfg, epoch) {
                    Ok(term) => {
                        report.alpha = term.alpha.or(report.alpha);
                        report.beta = term.beta.or(report.beta);
                        dims.extend(term.pca_dim);
                        dist = Some(term.loss);
                    }
                    Err(e) if is_structural(&e) => {
                        log::warn!("epoch {epoch}: distance term skipped ({e})");
                        report.skipped_batches += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        let total = match &dist {
            Some(d) => weighted_total(&mut tape, d, &ce, cfg.lambda)?,
            None => ce,
        };
        let grads = tape.backward(total.var)?;
        let grad_refs: Vec<&[f64]> = params.iter().map(|&p| grads.wrt(p)).collect();
        adam.step(model.params_mut(), &grad_refs)?;
        report.batches.push(BatchRecord { ce: ce.value, dist: dist.map(|d| d.value), total: total.value });
    }
    if !dims.is_empty() {
        report.pca_dim = Some(dims.iter().sum::<usize>() as f64 / dims.len() as f64);
    }
    Ok(report)
}

/// Evaluation-mode predictions and latents.
pub fn evaluate(model: &MlpModel, data: &Dataset) -> Result<(Vec<usize>, Tensor)> {
    let (logits, latents) = model.predict(&data.features)?;
    Ok((argmax_rows(&logits), latents))
}

/// Trains one seeded trial with plateau scheduling and early stopping on
/// validation accuracy, then scores the best-validation parameters on test data.
pub fn run_training(widths: &[usize], data: &DatasetSplit, cfg: &TrainConfig, seed: u64) -> Result<TrialResult> {
    cfg.validate()?;
    if widths.first() != Some(&data.train.dim()) {
        return Err(Error::Config(format!("model input width {widths:?} vs data width {}", data.train.dim())));
    }
    if widths.last() != Some(&data.num_classes) {
        return Err(Error::Config(format!("model output width {widths:?} vs {} classes", data.num_classes)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MlpModel::new(widths, cfg.dropout_prob, &mut rng)?;
    let mut adam = AdamState::new(model.params(), cfg.learning_rate);
    let mut plateau = PlateauScheduler::new(cfg.plateau_patience, cfg.plateau_factor);
    let mut stopper = EarlyStopper::new(cfg.early_stop_patience);

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    for epoch in 0..cfg.max_epochs {
        let lr = adam.learning_rate;
        let report = train_epoch(&mut model, &mut adam, &data.train, cfg, epoch, &mut rng)?;
        let (val_preds, _) = evaluate(&model, &data.validation)?;
        let val_acc = accuracy(&val_preds, &data.validation.labels)?;
        history.push(EpochStats {
            epoch,
            lr,
            alpha: report.alpha,
            beta: report.beta,
            pca_dim: report.pca_dim,
            train_ce: report.mean_ce(),
            train_dist: report.mean_dist(),
            train_total: report.mean_total(),
            val_acc,
        });
        if best.as_ref().is_none_or(|(b, _, _)| val_acc > *b) {
            best = Some((val_acc, epoch, model.params().to_vec()));
        }
        plateau.update(val_acc, &mut adam.learning_rate);
        if stopper.update(val_acc) {
            break;
        }
    }

    let epochs_used = history.len();
    let (best_val_acc, best_epoch, params) = best.expect("at least one epoch");
    model.set_params(params);
    let (test_predictions, test_latents) = evaluate(&model, &data.test)?;
    Ok(TrialResult {
        seed,
        history,
        epochs_used,
        best_epoch,
        best_val_acc,
        test_accuracy: accuracy(&test_predictions, &data.test.labels)?,
        test_micro_f1: micro_f1(&test_predictions, &data.test.labels)?,
        test_silhouette: silhouette_score(&test_latents, &data.test.labels)?,
        test_latents,
        test_predictions,
        params: model.params().to_vec(),
    })
}

/// `cfg.trials` sequential trials with seeds `cfg.seed, cfg.seed + 1, …`.
pub fn run_trials(widths: &[usize], data: &DatasetSplit, cfg: &TrainConfig) -> Result<Vec<TrialResult>> {
    (0..cfg.trials as u64).map(|t| run_training(widths, data, cfg, cfg.seed + t)).collect()
}
