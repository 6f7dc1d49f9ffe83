//! Desk-scale decoder-only transformer with prefix and LoRA adapters.

pub mod checkpoint;
pub mod config;
pub mod generate;
pub mod lora;
pub mod ops;
pub mod prefix;
pub mod tokenizer;
pub mod transformer;
pub mod weights;

pub use config::{lora_param_count, prefix_param_count, LoraConfig, LoraTarget, ModelConfig, PrefixConfig};
pub use generate::argmax;
pub use lora::{apply_lora, LoraLayer, LoraPair, LoraParams, LoraView};
pub use prefix::PrefixParams;
pub use tokenizer::{TokenUnit, Tokenizer};
pub use transformer::{Adapter, Forward, Gradients, Transformer};
pub use weights::{BaseWeights, BlockWeights};
