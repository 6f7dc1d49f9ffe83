//! Low-rank adapters on the query/value projections.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::config::{LoraConfig, LoraTarget, ModelConfig};
use super::transformer::{Adapter, Forward, Transformer};
use crate::error::{Error, Result};
use crate::num::Real;

/// `A` is `[r][h]`, `B` is `[h][r]`; the adapted projection is
/// `W + (alpha / r) · B · A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraPair<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraLayer<T> {
    pub query: Option<LoraPair<T>>,
    pub value: Option<LoraPair<T>>,
}

impl<T> LoraLayer<T> {
    pub fn pair(&self, target: LoraTarget) -> Option<&LoraPair<T>> {
        match target {
            LoraTarget::Query => self.query.as_ref(),
            LoraTarget::Value => self.value.as_ref(),
        }
    }

    pub fn pair_mut(&mut self, target: LoraTarget) -> Option<&mut LoraPair<T>> {
        match target {
            LoraTarget::Query => self.query.as_mut(),
            LoraTarget::Value => self.value.as_mut(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraParams<T> {
    pub config: LoraConfig,
    pub hidden_dim: usize,
    pub layers: Vec<LoraLayer<T>>,
}

impl<T: Real> LoraParams<T> {
    pub fn zeros(mc: &ModelConfig, lc: &LoraConfig) -> Result<Self> {
        lc.validate()?;
        let h = mc.hidden_dim;
        let r = lc.rank;
        let pair = |t: LoraTarget| {
            lc.targets(t).then(|| LoraPair {
                a: vec![T::zero(); r * h],
                b: vec![T::zero(); h * r],
            })
        };
        Ok(Self {
            config: lc.clone(),
            hidden_dim: h,
            layers: (0..mc.num_layers)
                .map(|_| LoraLayer {
                    query: pair(LoraTarget::Query),
                    value: pair(LoraTarget::Value),
                })
                .collect(),
        })
    }

    /// Kaiming-uniform `A` (bound `1/sqrt(h)`), zero `B`: the initial delta is zero.
    pub fn init(mc: &ModelConfig, lc: &LoraConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(mc, lc)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (mc.hidden_dim as f64).sqrt();
        let u = Uniform::new(-bound, bound).unwrap();
        for layer in &mut p.layers {
            for pair in [layer.query.as_mut(), layer.value.as_mut()].into_iter().flatten() {
                for x in &mut pair.a {
                    *x = T::of(u.sample(&mut rng));
                }
            }
        }
        Ok(p)
    }

    pub fn scale(&self) -> T {
        T::of(self.config.scale())
    }

    pub fn pairs(&self) -> impl Iterator<Item = &LoraPair<T>> {
        self.layers
            .iter()
            .flat_map(|l| [l.query.as_ref(), l.value.as_ref()].into_iter().flatten())
    }

    pub fn pairs_mut(&mut self) -> impl Iterator<Item = &mut LoraPair<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.query.as_mut(), l.value.as_mut()].into_iter().flatten())
    }

    pub fn num_params(&self) -> usize {
        self.pairs().map(|p| p.a.len() + p.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.pairs().all(|p| p.a.iter().chain(&p.b).all(|x| x.is_finite()))
    }

    pub fn check_compatible(&self, mc: &ModelConfig) -> Result<()> {
        self.config.validate()?;
        let (h, r) = (mc.hidden_dim, self.config.rank);
        let bad = self.hidden_dim != h
            || self.layers.len() != mc.num_layers
            || self.pairs().any(|p| p.a.len() != r * h || p.b.len() != h * r)
            || self.layers.iter().any(|l| {
                l.query.is_some() != self.config.targets(LoraTarget::Query)
                    || l.value.is_some() != self.config.targets(LoraTarget::Value)
            });
        if bad {
            return Err(Error::config(format!(
                "LoRA adapter (h={}, layers={}, r={r}) incompatible with model (h={h}, L={})",
                self.hidden_dim,
                self.layers.len(),
                mc.num_layers
            )));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> LoraParams<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        let cp = |p: &Option<LoraPair<T>>| {
            p.as_ref().map(|p| LoraPair {
                a: c(&p.a),
                b: c(&p.b),
            })
        };
        LoraParams {
            config: self.config.clone(),
            hidden_dim: self.hidden_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LoraLayer {
                    query: cp(&l.query),
                    value: cp(&l.value),
                })
                .collect(),
        }
    }
}

/// A base model seen through a LoRA adapter. The base weights are borrowed
/// immutably and never modified.
#[derive(Debug, Clone, Copy)]
pub struct LoraView<'a, T> {
    pub model: &'a Transformer<T>,
    pub lora: &'a LoraParams<T>,
}

/// Pairs a model with a LoRA adapter after checking shapes.
pub fn apply_lora<'a, T: Real>(
    model: &'a Transformer<T>,
    lora: &'a LoraParams<T>,
) -> Result<LoraView<'a, T>> {
    lora.check_compatible(model.config())?;
    Ok(LoraView { model, lora })
}

impl<T: Real> LoraView<'_, T> {
    pub fn forward(&self, tokens: &[u32]) -> Result<Forward<T>> {
        self.model.forward_with(tokens, Adapter::Lora(self.lora))
    }

    /// The effective `[h][h]` projection `W + (alpha/r)·B·A` for one layer.
    pub fn projection(&self, layer: usize, target: LoraTarget) -> Vec<T> {
        let block = &self.model.weights().blocks[layer];
        let base = match target {
            LoraTarget::Query => &block.wq,
            LoraTarget::Value => &block.wv,
        };
        let mut w = base.clone();
        if let Some(pair) = self.lora.layers[layer].pair(target) {
            let h = self.lora.hidden_dim;
            let r = self.lora.config.rank;
            let s = self.lora.scale();
            for i in 0..h {
                for j in 0..h {
                    let mut acc = T::zero();
                    for k in 0..r {
                        acc += pair.b[i * r + k] * pair.a[k * h + j];
                    }
                    w[i * h + j] += s * acc;
                }
            }
        }
        w
    }
}
