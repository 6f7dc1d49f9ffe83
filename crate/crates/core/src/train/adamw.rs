//! AdamW with decoupled weight decay and bias-corrected moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BaseWeights, LoraParams, PrefixParams};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.1,
        }
    }
}

/// Anything whose scalars an optimizer can update, exposed as named flat slices
/// in a stable order.
pub trait Trainable<T> {
    fn slices(&self) -> Vec<(String, &[T])>;
    fn slices_mut(&mut self) -> Vec<&mut [T]>;

    fn num_trainable(&self) -> usize {
        self.slices().iter().map(|(_, s)| s.len()).sum()
    }
}

impl<T: Real> Trainable<T> for PrefixParams<T> {
    fn slices(&self) -> Vec<(String, &[T])> {
        vec![("prefix.keys".into(), &self.keys), ("prefix.values".into(), &self.values)]
    }

    fn slices_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.keys, &mut self.values]
    }
}

impl<T: Real> Trainable<T> for LoraParams<T> {
    fn slices(&self) -> Vec<(String, &[T])> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (tag, pair) in [("query", &layer.query), ("value", &layer.value)] {
                if let Some(p) = pair {
                    out.push((format!("lora.{l}.{tag}.a"), &p.a[..]));
                    out.push((format!("lora.{l}.{tag}.b"), &p.b[..]));
                }
            }
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [T]> {
        self.pairs_mut()
            .flat_map(|p| [&mut p.a[..], &mut p.b[..]])
            .collect()
    }
}

impl<T: Real> Trainable<T> for BaseWeights<T> {
    fn slices(&self) -> Vec<(String, &[T])> {
        self.tensors()
    }

    fn slices_mut(&mut self) -> Vec<&mut [T]> {
        self.tensors_mut().into_iter().map(|v| &mut v[..]).collect()
    }
}

/// First and second moments, kept at 64-bit regardless of parameter precision.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamWState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamWState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One AdamW update. Fails without touching any parameter if a gradient is
/// non-finite.
pub fn adamw_step<T: Real, P: Trainable<T>>(
    params: &mut P,
    grads: &P,
    state: &mut AdamWState,
    cfg: &AdamWConfig,
    lr: f64,
) -> Result<()> {
    let grads = grads.slices();
    for (name, g) in &grads {
        if let Some(index) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                tensor: name.clone(),
                index,
                context: String::new(),
            });
        }
    }
    let mut params = params.slices_mut();
    if params.len() != grads.len()
        || params.iter().zip(&grads).any(|(p, (_, g))| p.len() != g.len())
    {
        return Err(Error::config("parameter and gradient shapes differ"));
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
        state.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - lr * cfg.weight_decay;
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].1;
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            let gj = g[j].f64();
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            let x = p[j].f64() * decay - lr * m_hat / (v_hat.sqrt() + cfg.eps);
            p[j] = T::of(x);
        }
    }
    Ok(())
}
