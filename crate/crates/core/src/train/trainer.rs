use serde::{Deserialize, Serialize};

use super::adamw::{adamw_step, AdamWConfig, AdamWState};
use super::schedule::PlateauSchedule;
use crate::error::{Error, Result};
use crate::model::checkpoint::{self, TensorKind};
use crate::model::{Adapter, Gradients, LoraConfig, LoraParams, PrefixConfig, PrefixParams, Tokenizer, Transformer};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub max_epochs: usize,
    pub optimizer: AdamWConfig,
    pub initial_lr: f64,
    pub lr_decay_factor: f64,
    pub patience_epochs: usize,
    pub min_lr: f64,
    /// Training stops once the epoch loss drops below this.
    pub early_stop_loss: f64,
    pub seed: u64,
    /// Test hook: poison the gradients at this epoch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inject_nan_at_epoch: Option<usize>,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            max_epochs: 450,
            optimizer: AdamWConfig::default(),
            initial_lr: 3e-2,
            lr_decay_factor: 10.0,
            patience_epochs: 10,
            min_lr: 3e-5,
            early_stop_loss: 1e-4,
            seed: 0,
            inject_nan_at_epoch: None,
        }
    }
}

impl TrainRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be > 0"));
        }
        if !(self.initial_lr > 0.0) {
            return Err(Error::config("initial_lr must be > 0"));
        }
        if self.patience_epochs == 0 {
            return Err(Error::config("patience_epochs must be >= 1"));
        }
        if !(self.lr_decay_factor > 1.0) {
            return Err(Error::config("lr_decay_factor must be > 1"));
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.initial_lr) {
            return Err(Error::config("min_lr must lie in (0, initial_lr]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epoch_losses: Vec<f64>,
    pub lr_changes: Vec<(usize, f64)>,
    /// Full-batch loss measured after the last update.
    pub final_loss: f64,
    pub epochs_run: usize,
}

/// Adapter specification before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdapterSpec {
    Prefix(PrefixConfig),
    Lora(LoraConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedAdapter<T> {
    Prefix(PrefixParams<T>),
    Lora(LoraParams<T>),
}

impl<T: Real> TrainedAdapter<T> {
    pub fn init(model: &Transformer<T>, spec: &AdapterSpec, seed: u64) -> Result<Self> {
        Ok(match spec {
            AdapterSpec::Prefix(pc) => Self::Prefix(PrefixParams::init(model.config(), *pc, seed)?),
            AdapterSpec::Lora(lc) => Self::Lora(LoraParams::init(model.config(), lc, seed)?),
        })
    }

    pub fn as_adapter(&self) -> Adapter<'_, T> {
        match self {
            Self::Prefix(p) => Adapter::Prefix(p),
            Self::Lora(l) => Adapter::Lora(l),
        }
    }

    pub fn prefix(&self) -> Option<&PrefixParams<T>> {
        match self {
            Self::Prefix(p) => Some(p),
            Self::Lora(_) => None,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        match self {
            Self::Prefix(p) => checkpoint::save_prefix(p, path),
            Self::Lora(l) => checkpoint::save_lora(l, path),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        match checkpoint::kind_of(path)? {
            TensorKind::Prefix => Ok(Self::Prefix(checkpoint::load_prefix(path)?)),
            TensorKind::Lora => Ok(Self::Lora(checkpoint::load_lora(path)?)),
            TensorKind::Base => Err(Error::config(format!("{} holds base weights, not an adapter", path.display()))),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Self::Prefix(p) => p.num_params(),
            Self::Lora(l) => l.num_params(),
        }
    }

    fn step(
        &mut self,
        grads: &Gradients<T>,
        state: &mut AdamWState,
        cfg: &AdamWConfig,
        lr: f64,
    ) -> Result<()> {
        match self {
            Self::Prefix(p) => adamw_step(p, grads.prefix.as_ref().expect("prefix grads"), state, cfg, lr),
            Self::Lora(l) => adamw_step(l, grads.lora.as_ref().expect("lora grads"), state, cfg, lr),
        }
    }
}

/// Token-weighted mean next-token loss over `batch`, and its gradient for the
/// active adapter.
pub fn batch_loss_and_grads<T: Real>(
    model: &Transformer<T>,
    adapter: Adapter<'_, T>,
    batch: &[Vec<u32>],
) -> Result<(f64, Gradients<T>)> {
    let denom: usize = batch.iter().map(|s| s.len().saturating_sub(1)).sum();
    if denom == 0 {
        return Err(Error::config("batch has no predictable tokens"));
    }
    let mut total = 0.0;
    let mut acc: Option<Gradients<T>> = None;
    for seq in batch {
        let (sum, g) = model.loss_and_grads(seq, adapter, denom, false)?;
        total += sum;
        match acc.as_mut() {
            Some(a) => a.add_assign(&g),
            None => acc = Some(g),
        }
    }
    Ok((total / denom as f64, acc.expect("non-empty batch")))
}

/// Token-weighted mean next-token loss without gradients.
pub fn batch_loss<T: Real>(model: &Transformer<T>, adapter: Adapter<'_, T>, batch: &[Vec<u32>]) -> Result<f64> {
    let mut total = 0.0;
    let mut denom = 0usize;
    for seq in batch {
        let n = seq.len() - 1;
        total += model.nll_loss(seq, adapter)? * n as f64;
        denom += n;
    }
    Ok(total / denom as f64)
}

/// Trains only the adapter: the base model is borrowed immutably throughout.
pub fn train_adapter<T: Real>(
    model: &Transformer<T>,
    mut adapter: TrainedAdapter<T>,
    batch: &[Vec<u32>],
    cfg: &TrainRunConfig,
) -> Result<(TrainedAdapter<T>, TrainTrace)> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::config("training needs at least one sentence"));
    }
    let max_len = model.config().max_seq_len;
    for (i, seq) in batch.iter().enumerate() {
        if seq.len() < 2 || seq.len() > max_len {
            return Err(Error::config(format!(
                "training sequence {i} has {} tokens, need 2..={max_len}",
                seq.len()
            )));
        }
    }

    let mut state = AdamWState::new();
    let mut schedule = PlateauSchedule::new(cfg);
    let mut trace = TrainTrace::default();
    for epoch in 0..cfg.max_epochs {
        let (loss, mut grads) = batch_loss_and_grads(model, adapter.as_adapter(), batch)?;
        if cfg.inject_nan_at_epoch == Some(epoch) {
            poison(&mut grads);
        }
        trace.epoch_losses.push(loss);
        trace.epochs_run = epoch + 1;
        if !loss.is_finite() {
            return Err(Error::Numeric {
                tensor: "loss".into(),
                index: epoch,
                context: String::new(),
            });
        }
        if loss < cfg.early_stop_loss {
            break;
        }
        let lr = schedule.lr();
        adapter
            .step(&grads, &mut state, &cfg.optimizer, lr)
            .map_err(|e| e.with_context(&format!("epoch {epoch}")))?;
        let next = schedule.observe(loss);
        if next != lr {
            trace.lr_changes.push((epoch + 1, next));
        }
    }
    trace.final_loss = batch_loss(model, adapter.as_adapter(), batch)?;
    Ok((adapter, trace))
}

/// Convenience wrapper: tokenizes sentences and initializes the adapter from
/// `cfg.seed`.
pub fn train_on_sentences<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    spec: &AdapterSpec,
    sentences: &[String],
    cfg: &TrainRunConfig,
) -> Result<(TrainedAdapter<T>, TrainTrace)> {
    let batch = sentences
        .iter()
        .map(|s| tokenizer.encode(s))
        .collect::<Result<Vec<_>>>()?;
    let adapter = TrainedAdapter::init(model, spec, cfg.seed)?;
    train_adapter(model, adapter, &batch, cfg)
}

fn poison<T: Real>(g: &mut Gradients<T>) {
    if let Some(p) = g.prefix.as_mut() {
        p.keys[0] = T::nan();
    }
    if let Some(l) = g.lora.as_mut() {
        if let Some(pair) = l.pairs_mut().next() {
            pair.a[0] = T::nan();
        }
    }
}
