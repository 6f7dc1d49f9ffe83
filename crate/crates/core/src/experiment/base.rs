//! Obtaining the frozen base model for a sweep.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::spec::{ModelEntry, WorldBase};
use crate::error::{Error, Result};
use crate::facts::Triple;
use crate::model::checkpoint::{load_base, save_base};
use crate::model::{ModelConfig, Tokenizer, Transformer};
use crate::train::pretrain;
use crate::world;

/// Background facts the base model is pretrained on.
pub fn background_facts(wb: &WorldBase) -> Vec<Triple> {
    world::sample_triples(wb.world_seed, wb.background_facts, &HashSet::new())
}

/// Facts absent from the background world: same people and vocabulary, new
/// (subject, predicate) pairs.
pub fn novel_facts(wb: &WorldBase, count: usize, seed: u64) -> Vec<Triple> {
    let exclude: HashSet<(String, String)> = background_facts(wb)
        .into_iter()
        .map(|t| (t.subject, t.predicate))
        .collect();
    world::sample_triples(seed, count, &exclude)
}

/// Pretrains a fresh model on the background corpus.
pub fn pretrain_world_base(mc: &ModelConfig, wb: &WorldBase) -> Result<(Transformer<f32>, Vec<f64>)> {
    let tok = Tokenizer::bytes();
    if mc.vocab_size != tok.vocab_size() {
        return Err(Error::config("world bases use the byte tokenizer (vocab_size 256)"));
    }
    let corpus = world::background_corpus(&background_facts(wb))
        .iter()
        .map(|s| tok.encode(s))
        .collect::<Result<Vec<_>>>()?;
    let mut model = Transformer::new(mc.clone())?;
    let losses = pretrain(&mut model, &corpus, &wb.pretrain)?;
    Ok((model, losses))
}

/// Cache file name keyed by everything that determines the weights.
pub fn world_base_cache_name(mc: &ModelConfig, wb: &WorldBase) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(mc)?);
    h.update(serde_json::to_vec(wb)?);
    Ok(format!("base-{}.json", &hex::encode(h.finalize())[..16]))
}

/// Loads the checkpoint, or builds the world base once and caches it under
/// `cache_dir`.
pub fn obtain_base(entry: &ModelEntry, cache_dir: &Path) -> Result<(Transformer<f32>, PathBuf)> {
    if let Some(path) = &entry.checkpoint {
        let model: Transformer<f32> = load_base(path)?;
        if *model.config() != entry.config {
            return Err(Error::config(format!(
                "checkpoint {} does not match the config of model `{}`",
                path.display(),
                entry.name
            )));
        }
        return Ok((model, path.clone()));
    }
    let wb = entry
        .world
        .as_ref()
        .ok_or_else(|| Error::config(format!("model `{}` has neither checkpoint nor world", entry.name)))?;
    let path = cache_dir.join(world_base_cache_name(&entry.config, wb)?);
    if path.exists() {
        return Ok((load_base(&path)?, path));
    }
    let (model, _) = pretrain_world_base(&entry.config, wb)?;
    std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    // write-then-rename so a concurrent reader never sees half a file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    save_base(&model, &tmp)?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok((model, path))
}
