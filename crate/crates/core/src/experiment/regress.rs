//! Regression check: do trained prefixes hurt MCQ accuracy on unrelated
//! questions?

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::collect_rows;
use super::runner::{run_seed, BaselineReport, SummaryRow};
use crate::error::{Error, Result};
use crate::eval::{mcq_accuracy, McqItem, McqMode};
use crate::model::checkpoint::load_base;
use crate::model::{Adapter, Tokenizer, Transformer};
use crate::train::TrainedAdapter;

pub const REGRESS_CSV: &str = "regress.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressRow {
    pub k: usize,
    pub model: String,
    pub run: String,
    pub base_acc: f64,
    pub tuned_acc: f64,
    pub delta: f64,
}

/// Seeded choice of up to `per_k` successful runs for each k.
pub fn sample_runs(rows: &[SummaryRow], per_k: usize, seed: u64) -> Vec<SummaryRow> {
    let mut by_k: BTreeMap<usize, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        by_k.entry(r.k).or_default().push(r);
    }
    let mut out = Vec::new();
    for (k, mut runs) in by_k {
        runs.sort_by(|a, b| a.run.cmp(&b.run));
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, &format!("regress-k{k}")));
        let mut picked: Vec<SummaryRow> = runs.choose_multiple(&mut rng, per_k).map(|r| (*r).clone()).collect();
        picked.sort_by(|a, b| a.run.cmp(&b.run));
        out.extend(picked);
    }
    out
}

/// Scores the base model and `per_k` sampled adapters per k on `items`, and
/// writes `regress.csv` into the sweep directory.
pub fn regress_sweep(sweep_dir: &Path, items: &[McqItem], mode: McqMode, per_k: usize, seed: u64) -> Result<Vec<RegressRow>> {
    if items.is_empty() {
        return Err(Error::config("regression needs at least one MCQ item"));
    }
    let rows = collect_rows(sweep_dir)?;
    if rows.is_empty() {
        return Err(Error::Report("sweep has no successful runs".into()));
    }
    let tok = Tokenizer::bytes();
    let mut bases: HashMap<String, (Transformer<f32>, f64)> = HashMap::new();
    let mut out = Vec::new();
    for row in sample_runs(&rows, per_k, seed) {
        if !bases.contains_key(&row.model) {
            let path = sweep_dir.join("baselines").join(format!("{}.json", row.model));
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let baseline: BaselineReport = serde_json::from_str(&text)?;
            let model: Transformer<f32> = load_base(&baseline.base_path)?;
            let acc = mcq_accuracy(&model, &tok, Adapter::None, items, mode)?.accuracy;
            bases.insert(row.model.clone(), (model, acc));
        }
        let (model, base_acc) = &bases[&row.model];
        let adapter: TrainedAdapter<f32> = TrainedAdapter::load(&sweep_dir.join("runs").join(&row.run).join("adapter.json"))?;
        let tuned_acc = mcq_accuracy(model, &tok, adapter.as_adapter(), items, mode)?.accuracy;
        out.push(RegressRow {
            k: row.k,
            model: row.model.clone(),
            run: row.run.clone(),
            base_acc: *base_acc,
            tuned_acc,
            delta: tuned_acc - base_acc,
        });
    }
    let path = sweep_dir.join(REGRESS_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    for r in &out {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(out)
}
