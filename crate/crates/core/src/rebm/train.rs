use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RebmError, RebmModel};
use crate::rng::rng_for;
use crate::seqmodel::ArModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RebmTrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    /// Noise samples per data string.
    pub k: usize,
    pub max_epochs: usize,
    /// Epochs without a new best dev loss before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for RebmTrainConfig {
    fn default() -> Self {
        Self { lr: 0.05, momentum: 0.9, batch: 32, k: 25, max_epochs: 30, patience: 2, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RebmEpoch {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub dev_loss: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct RebmOutcome<B> {
    pub model: RebmModel<B>,
    pub curve: Vec<RebmEpoch>,
    pub best_epoch: usize,
}

const CHUNK: usize = 8;

/// Noise for item `i` of a pass, from its own seed stream.
fn noise<B: ArModel>(m: &RebmModel<B>, k: usize, seed: u64, parts: &[u64]) -> Vec<Vec<u32>> {
    let mut rng = rng_for(seed, parts);
    (0..k).map(|_| m.sample_base(&mut rng)).collect()
}

fn mean_dev_loss<B: ArModel>(m: &RebmModel<B>, dev: &[Vec<u32>], dev_noise: &[Vec<Vec<u32>>]) -> f64 {
    let parts: Vec<f64> = dev
        .par_chunks(CHUNK)
        .zip(dev_noise.par_chunks(CHUNK))
        .map(|(xs, ns)| xs.iter().zip(ns).map(|(x, n)| m.nce_loss(x, n)).sum::<f64>())
        .collect();
    parts.iter().sum::<f64>() / dev.len() as f64
}

/// Trains the discriminator with ranking NCE against fresh base samples,
/// keeping the base frozen. Dev loss uses one fixed noise draw so epochs
/// are comparable; training stops once it has not improved for `patience`
/// epochs and the best parameters are returned.
pub fn train_rebm<B: ArModel + Clone>(
    model: RebmModel<B>,
    train: &[Vec<u32>],
    dev: &[Vec<u32>],
    cfg: &RebmTrainConfig,
) -> Result<RebmOutcome<B>, RebmError> {
    if cfg.k == 0 || cfg.batch == 0 || cfg.patience == 0 || !(cfg.lr > 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(RebmError::Config("need k, batch, patience, lr > 0 and momentum in [0, 1)".into()));
    }
    if train.is_empty() {
        return Err(RebmError::Config("training corpus is empty".into()));
    }
    let dev = if dev.is_empty() { train } else { dev };
    let dev_noise: Vec<Vec<Vec<u32>>> =
        (0..dev.len() as u64).into_par_iter().map(|i| noise(&model, cfg.k, cfg.seed, &[0, i])).collect();
    let mut model = model;
    let initial = mean_dev_loss(&model, dev, &dev_noise);
    let mut best = (initial, 0usize, model.disc.clone());
    let mut curve = vec![RebmEpoch { epoch: 0, train_loss: None, dev_loss: initial, accepted: true }];
    let mut velocity = vec![0.0; model.disc.params().len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stale = 0;
    let diverged = |epoch, best: &(f64, usize, super::Discriminator)| RebmError::Diverged {
        epoch,
        last_good: best.2.params().to_vec(),
    };

    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(cfg.seed, &[1, epoch as u64]));
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch).enumerate() {
            let n = velocity.len();
            let m = &model;
            let parts: Vec<(f64, Vec<f64>)> = batch
                .par_chunks(CHUNK)
                .enumerate()
                .map(|(c, idx)| {
                    let mut g = vec![0.0; n];
                    let mut loss = 0.0;
                    for (j, &i) in idx.iter().enumerate() {
                        let slot = (b * cfg.batch + c * CHUNK + j) as u64;
                        let ns = noise(m, cfg.k, cfg.seed, &[2, epoch as u64, slot]);
                        loss += m.nce_loss_grad(&train[i], &ns, &mut g);
                    }
                    (loss, g)
                })
                .collect();
            let mut grad = vec![0.0; n];
            let mut loss = 0.0;
            for (l, g) in parts {
                loss += l;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(diverged(epoch, &best));
            }
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            for ((p, v), g) in model.disc.params_mut().iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v + g * scale;
                *p -= cfg.lr * *v;
            }
        }
        let dev_loss = mean_dev_loss(&model, dev, &dev_noise);
        if !dev_loss.is_finite() {
            return Err(diverged(epoch, &best));
        }
        let accepted = dev_loss < best.0;
        curve.push(RebmEpoch { epoch, train_loss: Some(total / train.len() as f64), dev_loss, accepted });
        if accepted {
            best = (dev_loss, epoch, model.disc.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    model.disc = best.2;
    Ok(RebmOutcome { model, curve, best_epoch: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rebm::toy::{fit_unigram, ToyTask};
    use crate::rebm::{Activation, Discriminator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (RebmModel<crate::seqmodel::NgramModel>, Vec<Vec<u32>>, Vec<Vec<u32>>) {
        let t = ToyTask { max_len: 5, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let train = t.sample_corpus(200, &mut rng);
        let dev = t.sample_corpus(50, &mut rng);
        let base = fit_unigram(t.vocab(), &train);
        (RebmModel::new(base, Discriminator::new(t.symbols, Activation::Tanh2), t.max_len), train, dev)
    }

    #[test]
    fn zero_epochs_leave_theta_unchanged() {
        let (m, train, dev) = setup();
        let cfg = RebmTrainConfig { max_epochs: 0, ..Default::default() };
        let out = train_rebm(m.clone(), &train, &dev, &cfg).unwrap();
        assert_eq!(out.model.disc, m.disc);
        assert_eq!(out.curve.len(), 1);
    }

    #[test]
    fn dev_loss_drops_and_runs_repeat() {
        let (m, train, dev) = setup();
        for k in [1, 25] {
            let cfg = RebmTrainConfig { k, max_epochs: 8, ..Default::default() };
            let a = train_rebm(m.clone(), &train, &dev, &cfg).unwrap();
            let b = train_rebm(m.clone(), &train, &dev, &cfg).unwrap();
            assert_eq!(a.model.disc, b.model.disc);
            let first = a.curve[0].dev_loss;
            assert!(a.curve[a.best_epoch].dev_loss < first, "k={k}: {:?}", a.curve);
        }
    }
}
