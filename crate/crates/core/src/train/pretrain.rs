//! Full-weight training used to build a desk-scale base model. Adapter
//! experiments never call into this module; they start from its output and
//! keep it frozen.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamw::{adamw_step, AdamWConfig, AdamWState};
use crate::error::{Error, Result};
use crate::model::{Adapter, Gradients, Transformer};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 24,
            batch_size: 16,
            peak_lr: 3e-3,
            weight_decay: 0.01,
            seed: 0,
        }
    }
}

/// Trains every base weight on `corpus` with AdamW and a linear decay to 10%
/// of the peak rate. Returns the mean loss of each epoch.
pub fn pretrain<T: Real>(
    model: &mut Transformer<T>,
    corpus: &[Vec<u32>],
    cfg: &PretrainConfig,
) -> Result<Vec<f64>> {
    if corpus.is_empty() || cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::config("pretraining needs a corpus, batch_size > 0 and epochs > 0"));
    }
    let opt = AdamWConfig {
        weight_decay: cfg.weight_decay,
        ..AdamWConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut state = AdamWState::new();
    let steps_per_epoch = corpus.len().div_ceil(cfg.batch_size);
    let total_steps = (steps_per_epoch * cfg.epochs) as f64;
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut tok_sum = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let denom: usize = chunk.iter().map(|&i| corpus[i].len() - 1).sum();
            let mut acc: Option<Gradients<T>> = None;
            for &i in chunk {
                let (sum, g) = model.loss_and_grads(&corpus[i], Adapter::None, denom, true)?;
                loss_sum += sum;
                match acc.as_mut() {
                    Some(a) => a.add_assign(&g),
                    None => acc = Some(g),
                }
            }
            tok_sum += denom;
            let grads = acc.and_then(|g| g.base).expect("base gradients requested");
            let lr = cfg.peak_lr * (1.0 - 0.9 * step as f64 / total_steps);
            adamw_step(model.weights_mut(), &grads, &mut state, &opt, lr)?;
            step += 1;
        }
        epoch_losses.push(loss_sum / tok_sum as f64);
    }
    Ok(epoch_losses)
}
