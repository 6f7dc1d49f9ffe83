use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the base decoder-only transformer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// The desk-scale configuration used throughout the test suite:
    /// h=64, four layers, four heads, byte vocabulary.
    pub fn toy() -> Self {
        Self {
            vocab_size: 256,
            hidden_dim: 64,
            num_layers: 4,
            num_heads: 4,
            ffn_dim: 256,
            max_seq_len: 128,
            seed: 0,
        }
    }

    /// The 7.1B-parameter reference shape, used for parameter-count arithmetic only.
    pub fn bloomz_7b1() -> Self {
        Self {
            vocab_size: 250_880,
            hidden_dim: 4096,
            num_layers: 30,
            num_heads: 32,
            ffn_dim: 4 * 4096,
            max_seq_len: 2048,
            seed: 0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("ffn_dim", self.ffn_dim),
            ("max_seq_len", self.max_seq_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::config(format!("{name} must be > 0")));
            }
        }
        if self.hidden_dim % self.num_heads != 0 {
            return Err(Error::config(format!(
                "hidden_dim {} not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        Ok(())
    }
}

/// Prefix length `n` (virtual tokens) and depth `d` (layers, counted from the
/// lowest block).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrefixConfig {
    pub n: usize,
    pub d: usize,
}

impl PrefixConfig {
    pub fn new(n: usize, d: usize, model: &ModelConfig) -> Result<Self> {
        let pc = Self { n, d };
        pc.validate(model)?;
        Ok(pc)
    }

    pub fn validate(&self, model: &ModelConfig) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("prefix length n must be >= 1"));
        }
        if self.d == 0 || self.d > model.num_layers {
            return Err(Error::config(format!(
                "prefix depth d={} outside [1, {}]",
                self.d, model.num_layers
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoraTarget {
    Query,
    Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    pub targets: Vec<LoraTarget>,
}

impl LoraConfig {
    pub fn new(rank: usize, alpha: f64, targets: &[LoraTarget]) -> Result<Self> {
        let mut targets = targets.to_vec();
        targets.sort();
        targets.dedup();
        let lc = Self {
            rank,
            alpha,
            targets,
        };
        lc.validate()?;
        Ok(lc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::config("LoRA rank must be >= 1"));
        }
        if self.targets.is_empty() {
            return Err(Error::config("LoRA needs at least one target projection"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::config("LoRA alpha must be finite"));
        }
        Ok(())
    }

    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    pub fn targets(&self, target: LoraTarget) -> bool {
        self.targets.contains(&target)
    }
}

/// Trainable scalars in a prefix: `2 · d · n` vectors of width `h`.
pub fn prefix_param_count(mc: &ModelConfig, pc: &PrefixConfig) -> usize {
    2 * pc.d * pc.n * mc.hidden_dim
}

/// Trainable scalars in a LoRA adapter: an `r×h` A and an `h×r` B per
/// targeted projection per layer.
pub fn lora_param_count(mc: &ModelConfig, lc: &LoraConfig) -> usize {
    lc.targets.len() * 2 * mc.hidden_dim * lc.rank * mc.num_layers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_scale_counts() {
        let mc = ModelConfig::bloomz_7b1();
        let pc = PrefixConfig::new(1, 1, &mc).unwrap();
        let lc = LoraConfig::new(8, 8.0, &[LoraTarget::Query, LoraTarget::Value]).unwrap();
        assert_eq!(prefix_param_count(&mc, &pc), 8192);
        assert_eq!(lora_param_count(&mc, &lc), 3_932_160);
        assert_eq!(lora_param_count(&mc, &lc) / prefix_param_count(&mc, &pc), 480);
        assert_eq!(lora_param_count(&mc, &lc) % prefix_param_count(&mc, &pc), 0);
    }

    #[test]
    fn toy_counts() {
        let mc = ModelConfig {
            hidden_dim: 64,
            num_layers: 2,
            ..ModelConfig::toy()
        };
        assert_eq!(prefix_param_count(&mc, &PrefixConfig { n: 4, d: 2 }), 1024);
        let lc = LoraConfig::new(2, 2.0, &[LoraTarget::Query, LoraTarget::Value]).unwrap();
        assert_eq!(lora_param_count(&mc, &lc), 1024);
    }

    #[test]
    fn rejects_bad_prefix() {
        let mc = ModelConfig::toy();
        assert!(PrefixConfig::new(0, 1, &mc).is_err());
        assert!(PrefixConfig::new(1, 0, &mc).is_err());
        assert!(PrefixConfig::new(1, 5, &mc).is_err());
        assert!(PrefixConfig::new(1, 4, &mc).is_ok());
    }

    #[test]
    fn rejects_bad_model() {
        let mut mc = ModelConfig::toy();
        mc.num_heads = 3;
        assert!(mc.validate().is_err());
        mc.num_heads = 4;
        mc.ffn_dim = 0;
        assert!(mc.validate().is_err());
    }

    #[test]
    fn lora_targets_dedup() {
        let lc = LoraConfig::new(4, 8.0, &[LoraTarget::Value, LoraTarget::Query, LoraTarget::Value])
            .unwrap();
        assert_eq!(lc.targets, vec![LoraTarget::Query, LoraTarget::Value]);
        assert!(LoraConfig::new(0, 8.0, &[LoraTarget::Query]).is_err());
    }
}
