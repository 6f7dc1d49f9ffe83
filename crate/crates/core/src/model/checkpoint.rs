//! JSON tensor container for base checkpoints and adapters.
//!
//! ```json
//! {"format": "factforge-tensors", "version": 1, "kind": "prefix",
//!  "dtype": "f32", "config": {...},
//!  "tensors": [{"name": "keys", "shape": [1, 1, 64], "data": [...]}]}
//! ```
//!
//! Adapters are always written to their own file; a base checkpoint never
//! contains adapter tensors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{LoraConfig, LoraTarget, ModelConfig, PrefixConfig};
use super::lora::LoraParams;
use super::prefix::PrefixParams;
use super::transformer::Transformer;
use super::weights::BaseWeights;
use crate::error::{Error, Result};
use crate::num::Real;

pub const FORMAT: &str = "factforge-tensors";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Base,
    Prefix,
    Lora,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorFile {
    pub format: String,
    pub version: u32,
    pub kind: TensorKind,
    pub dtype: String,
    pub config: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

impl TensorFile {
    fn new<T: Real>(kind: TensorKind, config: serde_json::Value) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            kind,
            dtype: T::DTYPE.into(),
            config,
            tensors: Vec::new(),
        }
    }

    fn push<T: Real>(&mut self, name: impl Into<String>, shape: Vec<usize>, data: &[T]) {
        self.tensors.push(TensorEntry {
            name: name.into(),
            shape,
            data: data.iter().map(|x| x.f64()).collect(),
        });
    }

    fn take<T: Real>(&mut self, name: &str, len: usize) -> Result<Vec<T>> {
        let pos = self
            .tensors
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::config(format!("tensor `{name}` missing from checkpoint")))?;
        let t = self.tensors.swap_remove(pos);
        let shape_len: usize = t.shape.iter().product();
        if t.data.len() != len || shape_len != len {
            return Err(Error::config(format!(
                "tensor `{name}` has {} values (shape {:?}), expected {len}",
                t.data.len(),
                t.shape
            )));
        }
        Ok(t.data.into_iter().map(T::of).collect())
    }

    fn expect_kind(&self, kind: TensorKind) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::config(format!(
                "unsupported tensor container {} v{}",
                self.format, self.version
            )));
        }
        if self.kind != kind {
            return Err(Error::config(format!(
                "expected a {kind:?} file, found {:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

pub fn base_to_file<T: Real>(model: &Transformer<T>) -> TensorFile {
    let mut file = TensorFile::new::<T>(
        TensorKind::Base,
        serde_json::to_value(model.config()).expect("config serializes"),
    );
    for (name, t) in model.weights().tensors() {
        file.push(name, vec![t.len()], t);
    }
    file
}

pub fn base_from_file<T: Real>(mut file: TensorFile) -> Result<Transformer<T>> {
    file.expect_kind(TensorKind::Base)?;
    let config: ModelConfig = serde_json::from_value(file.config.clone())?;
    config.validate()?;
    let mut weights = BaseWeights::<T>::zeros(&config);
    let names: Vec<(String, usize)> = weights
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.len()))
        .collect();
    for ((name, len), slot) in names.into_iter().zip(weights.tensors_mut()) {
        *slot = file.take(&name, len)?;
    }
    Transformer::from_weights(config, weights)
}

pub fn save_base<T: Real>(model: &Transformer<T>, path: &Path) -> Result<()> {
    base_to_file(model).write(path)
}

pub fn load_base<T: Real>(path: &Path) -> Result<Transformer<T>> {
    base_from_file(TensorFile::read(path)?)
}

/// Kind recorded in a tensor file's header.
pub fn kind_of(path: &Path) -> Result<TensorKind> {
    #[derive(Deserialize)]
    struct Head {
        kind: TensorKind,
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str::<Head>(&text)?.kind)
}

pub fn save_prefix<T: Real>(prefix: &PrefixParams<T>, path: &Path) -> Result<()> {
    let mut file = TensorFile::new::<T>(
        TensorKind::Prefix,
        serde_json::json!({ "n": prefix.config.n, "d": prefix.config.d, "hidden_dim": prefix.hidden_dim }),
    );
    let shape = vec![prefix.config.d, prefix.config.n, prefix.hidden_dim];
    file.push("keys", shape.clone(), &prefix.keys);
    file.push("values", shape, &prefix.values);
    file.write(path)
}

pub fn load_prefix<T: Real>(path: &Path) -> Result<PrefixParams<T>> {
    let mut file = TensorFile::read(path)?;
    file.expect_kind(TensorKind::Prefix)?;
    #[derive(Deserialize)]
    struct Header {
        n: usize,
        d: usize,
        hidden_dim: usize,
    }
    let hd: Header = serde_json::from_value(file.config.clone())?;
    let len = hd.d * hd.n * hd.hidden_dim;
    Ok(PrefixParams {
        config: PrefixConfig { n: hd.n, d: hd.d },
        hidden_dim: hd.hidden_dim,
        keys: file.take("keys", len)?,
        values: file.take("values", len)?,
    })
}

pub fn save_lora<T: Real>(lora: &LoraParams<T>, path: &Path) -> Result<()> {
    let mut file = TensorFile::new::<T>(
        TensorKind::Lora,
        serde_json::json!({
            "lora": lora.config,
            "hidden_dim": lora.hidden_dim,
            "num_layers": lora.layers.len(),
        }),
    );
    let (h, r) = (lora.hidden_dim, lora.config.rank);
    for (l, layer) in lora.layers.iter().enumerate() {
        for (tag, pair) in [("query", &layer.query), ("value", &layer.value)] {
            if let Some(p) = pair {
                file.push(format!("layers.{l}.{tag}.a"), vec![r, h], &p.a);
                file.push(format!("layers.{l}.{tag}.b"), vec![h, r], &p.b);
            }
        }
    }
    file.write(path)
}

pub fn load_lora<T: Real>(path: &Path) -> Result<LoraParams<T>> {
    let mut file = TensorFile::read(path)?;
    file.expect_kind(TensorKind::Lora)?;
    #[derive(Deserialize)]
    struct Header {
        lora: LoraConfig,
        hidden_dim: usize,
        num_layers: usize,
    }
    let hd: Header = serde_json::from_value(file.config.clone())?;
    hd.lora.validate()?;
    let (h, r) = (hd.hidden_dim, hd.lora.rank);
    let mut layers = Vec::with_capacity(hd.num_layers);
    for l in 0..hd.num_layers {
        let mut take_pair = |target: LoraTarget, tag: &str| -> Result<Option<super::lora::LoraPair<T>>> {
            if !hd.lora.targets(target) {
                return Ok(None);
            }
            Ok(Some(super::lora::LoraPair {
                a: file.take(&format!("layers.{l}.{tag}.a"), r * h)?,
                b: file.take(&format!("layers.{l}.{tag}.b"), h * r)?,
            }))
        };
        let query = take_pair(LoraTarget::Query, "query")?;
        let value = take_pair(LoraTarget::Value, "value")?;
        layers.push(super::lora::LoraLayer { query, value });
    }
    Ok(LoraParams {
        config: hd.lora,
        hidden_dim: h,
        layers,
    })
}
