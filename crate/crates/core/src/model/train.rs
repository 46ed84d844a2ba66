use rand::seq::SliceRandom;

use super::checkpoint::{Checkpoint, CheckpointMeta};
use super::config::{LossKind, ModelError, TrainConfig};
use super::network::{batch_loss_grads, predict_value, PreparedSample};
use super::optim::{adam_step, AdamState};
use super::params::init_params;
use crate::rng::stream;

/// Scalar loss and its derivative with respect to the prediction. The L1
/// subgradient at an exact tie is zero.
pub fn loss_and_grad(pred: f64, target: f64, kind: LossKind) -> (f64, f64) {
    let d = pred - target;
    match kind {
        LossKind::L1 => (d.abs(), if d == 0.0 { 0.0 } else { d.signum() }),
        LossKind::Mse => (d * d, 2.0 * d),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean absolute error of the predictions made while training, each
    /// taken before the batch update that follows it.
    pub train_mae: f64,
    /// Mean absolute error over the validation set after the epoch; absent
    /// when there is no validation set.
    pub val_mae: Option<f64>,
}

pub struct TrainOutcome {
    /// Best checkpoint by validation error, or the last epoch's when no
    /// validation set was given.
    pub checkpoint: Checkpoint,
    pub metrics: Vec<EpochMetrics>,
}

/// Full training run: seeded epoch shuffles, mean-loss batches, one Adam
/// step per batch. Any non-finite loss or prediction aborts immediately.
pub fn train_loop(
    train: &[PreparedSample],
    val: &[PreparedSample],
    meta: &CheckpointMeta,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    cfg.validate()?;
    meta.model.validate()?;
    let batch = cfg.batch_size.max(1);

    let mut params = init_params(&meta.model, &meta.graph)?;
    let mut adam = AdamState::new();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut last: Option<Checkpoint> = None;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut stream(cfg.seed, &[epoch as u64]));

        let mut abs_err = 0.0;
        for chunk in order.chunks(batch) {
            let samples: Vec<&PreparedSample> = chunk.iter().map(|&i| &train[i]).collect();
            let out = batch_loss_grads(&meta.model, &params, &samples, cfg.loss_kind)?;
            for (s, p) in samples.iter().zip(&out.predictions) {
                abs_err += (p - s.target.expect("checked in batch_loss_grads")).abs();
            }
            adam_step(&mut params, &out.grads, &mut adam, cfg);
        }
        if !params.all_finite() {
            return Err(ModelError::NonFinite {
                context: format!("parameters after epoch {epoch}"),
            });
        }
        let train_mae = abs_err / train.len() as f64;

        let val_mae = if val.is_empty() {
            None
        } else {
            let mut err = 0.0;
            for s in val {
                let target = s.target.ok_or_else(|| ModelError::MissingTarget {
                    id: s.id.clone(),
                    target: meta.target.clone(),
                })?;
                err += (predict_value(&meta.model, &params, s)? - target).abs();
            }
            Some(err / val.len() as f64)
        };
        metrics.push(EpochMetrics {
            epoch,
            train_mae,
            val_mae,
        });

        let snapshot = || Checkpoint {
            meta: meta.clone(),
            epoch,
            params: params.clone(),
            adam: adam.clone(),
        };
        match val_mae {
            Some(v) => {
                if best.as_ref().map_or(true, |(b, _)| v < *b) {
                    best = Some((v, snapshot()));
                }
            }
            None => last = Some(snapshot()),
        }
    }

    let checkpoint = best
        .map(|(_, c)| c)
        .or(last)
        .expect("at least one epoch ran");
    Ok(TrainOutcome {
        checkpoint,
        metrics,
    })
}
