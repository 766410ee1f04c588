use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{sequence_log_prob, Sequence, Trainable};
use crate::rng::rng_for;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub seed: u64,
    /// Epochs without a new best dev loss before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 0.1, momentum: 0.9, batch: 16, seed: 0, patience: 2, max_epochs: 20, clip: Some(5.0) }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if matches!(self.clip, Some(c) if !(c > 0.0)) {
            return bad("clip must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("loss diverged in epoch {epoch}")]
    Diverged {
        epoch: usize,
        /// Parameters of the best checkpoint accepted before divergence.
        last_good: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStat {
    /// 0 is the untrained model.
    pub epoch: usize,
    /// Mean per-token training loss over the epoch (`None` for epoch 0).
    pub train_loss: Option<f64>,
    /// Per-token dev loss after the epoch.
    pub dev_loss: f64,
    /// This epoch set a new best dev loss.
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    /// Parameters at the first epoch reaching the minimum dev loss.
    pub model: M,
    pub curve: Vec<EpochStat>,
    pub best_epoch: usize,
}

/// Sequences per parallel work unit. Fixed, so the reduction order and
/// thus the result do not depend on the thread count.
const CHUNK: usize = 8;

/// Summed loss and gradient over `seqs`, reduced in index order.
fn batch_grad<M: Trainable>(model: &M, seqs: &[&Sequence]) -> (f64, Vec<f64>) {
    let n = model.params().len();
    let parts: Vec<(f64, Vec<f64>)> = seqs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; n];
            let loss = chunk.iter().map(|s| model.loss_grad(s, &mut g)).sum::<f64>();
            (loss, g)
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    (loss, grad)
}

/// Per-token negative log-likelihood.
pub fn mean_token_loss<M: Trainable>(model: &M, seqs: &[Sequence]) -> f64 {
    let parts: Vec<f64> =
        seqs.par_chunks(CHUNK).map(|c| c.iter().map(|s| -sequence_log_prob(model, s)).sum::<f64>()).collect();
    let tokens: usize = seqs.iter().map(|s| s.steps()).sum();
    parts.iter().sum::<f64>() / tokens as f64
}

/// Minibatch SGD with momentum on per-token cross-entropy, early-stopped on
/// dev loss. Batches are reshuffled every epoch from `(seed, epoch)`.
pub fn train_ar<M: Trainable + Clone>(
    model: M,
    train: &[Sequence],
    dev: &[Sequence],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<M>, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let dev = if dev.is_empty() { train } else { dev };
    let mut model = model;
    let mut velocity = vec![0.0; model.params().len()];
    let initial = mean_token_loss(&model, dev);
    let mut best = (initial, 0usize, model.clone());
    let mut curve = vec![EpochStat { epoch: 0, train_loss: None, dev_loss: initial, accepted: true }];
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        if model.params().is_empty() {
            break;
        }
        order.sort_unstable();
        order.shuffle(&mut rng_for(cfg.seed, &[epoch as u64]));
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(cfg.batch) {
            let seqs: Vec<&Sequence> = batch.iter().map(|&i| &train[i]).collect();
            let tokens: usize = seqs.iter().map(|s| s.steps()).sum();
            let (loss, mut grad) = batch_grad(&model, &seqs);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Diverged { epoch, last_good: best.2.params().to_vec() });
            }
            epoch_loss += loss;
            epoch_tokens += tokens;
            let scale = 1.0 / tokens as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if let Some(c) = cfg.clip {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > c {
                    grad.iter_mut().for_each(|g| *g *= c / norm);
                }
            }
            for ((p, v), g) in model.params_mut().iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *p -= cfg.lr * *v;
            }
        }
        let dev_loss = mean_token_loss(&model, dev);
        if !dev_loss.is_finite() {
            return Err(TrainError::Diverged { epoch, last_good: best.2.params().to_vec() });
        }
        let accepted = dev_loss < best.0;
        curve.push(EpochStat { epoch, train_loss: Some(epoch_loss / epoch_tokens as f64), dev_loss, accepted });
        if accepted {
            best = (dev_loss, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome { model: best.2, curve, best_epoch: best.1 })
}
