use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::subsets::DEFAULT_K_VALUES;
use crate::error::{Error, Result};
use crate::eval::McqMode;
use crate::model::{LoraConfig, LoraTarget, ModelConfig, PrefixConfig};
use crate::train::{AdapterSpec, PretrainConfig, TrainRunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Prefix,
    Lora,
}

/// A prefix depth: a layer count, or `"full"` for every layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Depth {
    Layers(usize),
    Full(FullDepth),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FullDepth {
    Full,
}

impl Depth {
    pub const FULL: Depth = Depth::Full(FullDepth::Full);

    pub fn resolve(self, mc: &ModelConfig) -> usize {
        match self {
            Depth::Layers(d) => d,
            Depth::Full(_) => mc.num_layers,
        }
    }
}

/// Builds a base model by pretraining on a synthetic world when no
/// checkpoint is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldBase {
    pub background_facts: usize,
    pub world_seed: u64,
    pub pretrain: PretrainConfig,
}

impl Default for WorldBase {
    fn default() -> Self {
        Self {
            background_facts: 200,
            world_seed: 1,
            pretrain: PretrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub config: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldBase>,
}

impl ModelEntry {
    pub fn toy() -> Self {
        Self {
            name: "toy".into(),
            config: ModelConfig::toy(),
            checkpoint: None,
            world: Some(WorldBase::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Greedy tokens generated after each cloze sentence.
    pub num_new_tokens: usize,
    pub mcq: bool,
    pub mcq_mode: McqMode,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            num_new_tokens: 10,
            mcq: true,
            mcq_mode: McqMode::Choice,
        }
    }
}

/// Test hook: poison one run's gradients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NanInjection {
    pub run: String,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub k_values: Vec<usize>,
    pub adapter: AdapterKind,
    pub prefix_n: Vec<usize>,
    pub prefix_d: Vec<Depth>,
    pub lora: LoraConfig,
    pub models: Vec<ModelEntry>,
    pub train: TrainRunConfig,
    pub eval: EvalSettings,
    /// Root of all randomness in the sweep.
    pub seed: u64,
    /// Worker threads for concurrent runs.
    pub parallelism: usize,
    /// Use only the first subsets for each k; `None` runs them all.
    pub max_runs_per_k: Option<usize>,
    pub inject_nan: Vec<NanInjection>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset.jsonl"),
            out_dir: PathBuf::from("sweep"),
            k_values: DEFAULT_K_VALUES.to_vec(),
            adapter: AdapterKind::Prefix,
            prefix_n: vec![1],
            prefix_d: vec![Depth::Layers(1)],
            lora: LoraConfig {
                rank: 8,
                alpha: 8.0,
                targets: vec![LoraTarget::Query, LoraTarget::Value],
            },
            models: vec![ModelEntry::toy()],
            train: TrainRunConfig::default(),
            eval: EvalSettings::default(),
            seed: 0,
            parallelism: 1,
            max_runs_per_k: None,
            inject_nan: Vec::new(),
        }
    }
}

/// One adapter configuration of the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSetting {
    pub spec: AdapterSpec,
    /// `n` and `d` as reported; zero for LoRA.
    pub n: usize,
    pub d: usize,
}

impl SweepSpec {
    /// Parses TOML, applies `key.path=value` overrides, then validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| Error::config(format!("sweep config: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let spec: SweepSpec = value
            .try_into()
            .map_err(|e| Error::config(format!("sweep config: {e}")))?;
        spec.validate_shape()?;
        Ok(spec)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("serialize sweep config: {e}")))
    }

    /// Checks that need no dataset.
    pub fn validate_shape(&self) -> Result<()> {
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::config("k_values must be non-empty and >= 1"));
        }
        if self.models.is_empty() {
            return Err(Error::config("at least one model is required"));
        }
        if self.parallelism == 0 {
            return Err(Error::config("parallelism must be >= 1"));
        }
        if self.max_runs_per_k == Some(0) {
            return Err(Error::config("max_runs_per_k must be >= 1"));
        }
        self.train.validate()?;
        for m in &self.models {
            m.config.validate()?;
            if m.checkpoint.is_none() && m.world.is_none() {
                return Err(Error::config(format!("model `{}` needs a checkpoint or a world base", m.name)));
            }
            self.settings(&m.config)?;
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.models.len() {
            return Err(Error::config("model names must be unique"));
        }
        Ok(())
    }

    /// Checks against the dataset size.
    pub fn validate_for(&self, dataset_size: usize) -> Result<()> {
        self.validate_shape()?;
        if let Some(&k) = self.k_values.iter().find(|&&k| k > dataset_size) {
            return Err(Error::config(format!("k = {k} exceeds the dataset size {dataset_size}")));
        }
        Ok(())
    }

    /// Adapter settings for one model, in grid order (n outer, d inner).
    pub fn settings(&self, mc: &ModelConfig) -> Result<Vec<AdapterSetting>> {
        match self.adapter {
            AdapterKind::Lora => {
                self.lora.validate()?;
                Ok(vec![AdapterSetting {
                    spec: AdapterSpec::Lora(self.lora.clone()),
                    n: 0,
                    d: 0,
                }])
            }
            AdapterKind::Prefix => {
                if self.prefix_n.is_empty() || self.prefix_d.is_empty() {
                    return Err(Error::config("prefix_n and prefix_d must be non-empty"));
                }
                let mut out = Vec::new();
                for &n in &self.prefix_n {
                    for &d in &self.prefix_d {
                        let pc = PrefixConfig::new(n, d.resolve(mc), mc)?;
                        out.push(AdapterSetting {
                            spec: AdapterSpec::Prefix(pc),
                            n: pc.n,
                            d: pc.d,
                        });
                    }
                }
                Ok(out)
            }
        }
    }

    /// Hash of the fully resolved configuration.
    pub fn config_hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    // interpret as TOML when possible, so numbers, booleans and arrays work
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

/// Applies `a.b.c=value`. Intermediate tables are created as needed; array
/// elements are addressed by index.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(format!("bad override path `{path}`")));
    }
    let mut cur = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert((*key).to_owned(), parse_scalar(raw.trim()));
                    return Ok(());
                }
                t.entry((*key).to_owned())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::config(format!("`{key}` in `{path}` must index an array")))?;
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| Error::config(format!("index {idx} out of range in `{path}`")))?;
                if last {
                    *slot = parse_scalar(raw.trim());
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::config(format!("`{path}` walks through a scalar"))),
        };
    }
    unreachable!("loop returns on the last key")
}
