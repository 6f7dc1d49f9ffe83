//! Prefix parameters: learned attention keys and values for `n` virtual
//! tokens in each of the lowest `d` layers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, PrefixConfig};
use crate::error::{Error, Result};
use crate::num::Real;

pub const PREFIX_INIT_STD: f64 = 0.02;

/// Keys and values are laid out `[d][n][h]`, already in projected space, so
/// they are consumed directly by attention without passing through `W_k`/`W_v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixParams<T> {
    pub config: PrefixConfig,
    pub hidden_dim: usize,
    pub keys: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> PrefixParams<T> {
    pub fn zeros(mc: &ModelConfig, pc: PrefixConfig) -> Result<Self> {
        pc.validate(mc)?;
        let len = pc.d * pc.n * mc.hidden_dim;
        Ok(Self {
            config: pc,
            hidden_dim: mc.hidden_dim,
            keys: vec![T::zero(); len],
            values: vec![T::zero(); len],
        })
    }

    /// i.i.d. N(0, 0.02) initialization.
    pub fn init(mc: &ModelConfig, pc: PrefixConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(mc, pc)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, PREFIX_INIT_STD).unwrap();
        for x in p.keys.iter_mut().chain(p.values.iter_mut()) {
            *x = T::of(normal.sample(&mut rng));
        }
        Ok(p)
    }

    pub fn depth(&self) -> usize {
        self.config.d
    }

    pub fn len(&self) -> usize {
        self.config.n
    }

    pub fn is_empty(&self) -> bool {
        self.config.n == 0
    }

    pub fn num_params(&self) -> usize {
        self.keys.len() + self.values.len()
    }

    /// Keys of `layer` as a `[n][h]` slice, or `None` above the prefix depth.
    pub fn layer_keys(&self, layer: usize) -> Option<&[T]> {
        let stride = self.config.n * self.hidden_dim;
        (layer < self.config.d).then(|| &self.keys[layer * stride..(layer + 1) * stride])
    }

    pub fn layer_values(&self, layer: usize) -> Option<&[T]> {
        let stride = self.config.n * self.hidden_dim;
        (layer < self.config.d).then(|| &self.values[layer * stride..(layer + 1) * stride])
    }

    pub fn check_compatible(&self, mc: &ModelConfig) -> Result<()> {
        self.config.validate(mc)?;
        let len = self.config.d * self.config.n * mc.hidden_dim;
        if self.hidden_dim != mc.hidden_dim || self.keys.len() != len || self.values.len() != len {
            return Err(Error::config(format!(
                "prefix shape [{}][{}][{}] incompatible with model h={}",
                self.config.d, self.config.n, self.hidden_dim, mc.hidden_dim
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.keys.iter().chain(&self.values).all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> PrefixParams<U> {
        PrefixParams {
            config: self.config,
            hidden_dim: self.hidden_dim,
            keys: self.keys.iter().map(|x| U::of(x.f64())).collect(),
            values: self.values.iter().map(|x| U::of(x.f64())).collect(),
        }
    }
}
