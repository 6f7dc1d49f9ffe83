use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::base::obtain_base;
use super::spec::{AdapterSetting, SweepSpec};
use super::subsets::make_subsets;
use crate::bench::{read_dataset, FactRecord};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_unknown, mcq_accuracy, prediction_accuracy, prefix_norms, EvalReport, McqItem,
};
use crate::model::{Adapter, Tokenizer, Transformer};
use crate::train::{train_adapter, AdapterSpec, TrainRunConfig, TrainTrace, TrainedAdapter};

/// Baseline scores of one base model on the whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub model: String,
    pub base_path: PathBuf,
    pub base_hash: String,
    pub accuracy: f64,
    pub per_fact_correct: BTreeMap<String, usize>,
    pub mcq_accuracy: Option<f64>,
}

pub fn evaluate_baseline(
    name: &str,
    base_path: &Path,
    model: &Transformer<f32>,
    tokenizer: &Tokenizer,
    records: &[FactRecord],
    spec: &SweepSpec,
) -> Result<BaselineReport> {
    let pred = prediction_accuracy(model, tokenizer, Adapter::None, records, spec.eval.num_new_tokens)?;
    let mcq = if spec.eval.mcq {
        let items: Vec<McqItem> = records.iter().map(McqItem::from).collect();
        Some(mcq_accuracy(model, tokenizer, Adapter::None, &items, spec.eval.mcq_mode)?.accuracy)
    } else {
        None
    };
    Ok(BaselineReport {
        model: name.to_owned(),
        base_path: base_path.to_owned(),
        base_hash: model.base_hash(),
        accuracy: pred.accuracy,
        per_fact_correct: pred.per_fact_correct,
        mcq_accuracy: mcq,
    })
}

/// Trains an adapter on the training sentences of `records`.
pub fn train_on_records(
    model: &Transformer<f32>,
    tokenizer: &Tokenizer,
    spec: &AdapterSpec,
    records: &[FactRecord],
    cfg: &TrainRunConfig,
) -> Result<(TrainedAdapter<f32>, TrainTrace)> {
    let batch = records
        .iter()
        .map(|r| tokenizer.encode(&r.training_sentence))
        .collect::<Result<Vec<_>>>()?;
    let adapter = TrainedAdapter::init(model, spec, cfg.seed)?;
    train_adapter(model, adapter, &batch, cfg)
}

/// Scores a trained adapter on its own facts.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_run(
    run_id: &str,
    model: &Transformer<f32>,
    tokenizer: &Tokenizer,
    adapter: &TrainedAdapter<f32>,
    records: &[FactRecord],
    final_loss: f64,
    baseline_correct: Option<&HashMap<String, usize>>,
    spec: &SweepSpec,
) -> Result<EvalReport> {
    let pred = prediction_accuracy(model, tokenizer, adapter.as_adapter(), records, spec.eval.num_new_tokens)?;
    let fact_ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let unknown: Vec<String> = match baseline_correct {
        Some(b) => baseline_unknown(&fact_ids, b)?.into_iter().map(str::to_owned).collect(),
        None => Vec::new(),
    };
    let learning = (baseline_correct.is_some() && !unknown.is_empty())
        .then(|| unknown.iter().any(|id| pred.per_fact_correct.get(id).copied().unwrap_or(0) > 0));
    let (key_norm, value_norm) = match adapter.prefix() {
        Some(p) => {
            let (k, v) = prefix_norms(p);
            (Some(k), Some(v))
        }
        None => (None, None),
    };
    let mcq = if spec.eval.mcq {
        let items: Vec<McqItem> = records.iter().map(McqItem::from).collect();
        Some(mcq_accuracy(model, tokenizer, adapter.as_adapter(), &items, spec.eval.mcq_mode)?.accuracy)
    } else {
        None
    };
    Ok(EvalReport {
        run_id: run_id.to_owned(),
        accuracy: pred.accuracy,
        correct: pred.correct(),
        sentences: pred.results.len(),
        per_fact_correct: pred.per_fact_correct,
        baseline_unknown: unknown,
        learning,
        final_loss,
        key_norm,
        value_norm,
        mcq_accuracy: mcq,
        predictions: pred.results,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub adapter: Option<String>,
    pub trace: Option<String>,
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub adapter: AdapterSpec,
    pub subset_index: usize,
    pub fact_ids: Vec<String>,
    pub artifacts: RunArtifacts,
    /// Wall-clock seconds since the epoch. The only nondeterministic fields
    /// in a sweep directory.
    pub started_at: u64,
    pub finished_at: u64,
    #[serde(flatten)]
    pub status: RunStatus,
    pub summary: Option<SummaryRow>,
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub model: String,
    pub run: String,
    pub accuracy: f64,
    pub learning: Option<bool>,
    pub final_loss: f64,
    pub key_norm: Option<f64>,
    pub value_norm: Option<f64>,
    pub mcq_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub out_dir: PathBuf,
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<RunFailure>,
}

impl SweepOutcome {
    pub fn all_failed(&self) -> bool {
        self.rows.is_empty() && !self.failures.is_empty()
    }
}

pub const SUMMARY_CSV: &str = "summary.csv";
pub const FAILURES_JSON: &str = "failures.json";

struct RunTask<'a> {
    run_id: String,
    model_idx: usize,
    k: usize,
    subset_index: usize,
    subset: &'a [usize],
    setting: AdapterSetting,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Seed for one run, derived from the root seed and the run id.
pub fn run_seed(root: u64, run_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(run_id.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn run_id(model: &str, k: usize, setting: &AdapterSetting, subset: usize) -> String {
    match &setting.spec {
        AdapterSpec::Prefix(pc) => format!("{model}-k{k}-n{}-d{}-s{subset:03}", pc.n, pc.d),
        AdapterSpec::Lora(lc) => format!("{model}-k{k}-lora-r{}-s{subset:03}", lc.rank),
    }
}

/// Runs every (k, model, adapter setting, subset) combination. Failed runs are
/// recorded and never stop the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    let records = read_dataset(&spec.dataset)?;
    spec.validate_for(records.len())?;
    let out = spec.out_dir.clone();
    for sub in ["runs", "bases", "baselines", "subsets"] {
        fs::create_dir_all(out.join(sub)).map_err(|e| Error::io(out.join(sub), e))?;
    }
    let spec_path = out.join("spec.toml");
    fs::write(&spec_path, spec.to_toml()?).map_err(|e| Error::io(&spec_path, e))?;
    let config_hash = spec.config_hash()?;
    let tokenizer = Tokenizer::bytes();

    let mut bases = Vec::new();
    let mut baselines: Vec<HashMap<String, usize>> = Vec::new();
    for entry in &spec.models {
        let (model, path) = obtain_base(entry, &out.join("bases"))?;
        let baseline = evaluate_baseline(&entry.name, &path, &model, &tokenizer, &records, spec)?;
        write_json(&out.join("baselines").join(format!("{}.json", entry.name)), &baseline)?;
        baselines.push(baseline.per_fact_correct.into_iter().collect());
        bases.push(model);
    }

    let mut subsets_by_k = Vec::new();
    for &k in &spec.k_values {
        let mut subsets = make_subsets(records.len(), k, spec.seed)?;
        if let Some(max) = spec.max_runs_per_k {
            subsets.truncate(max);
        }
        let ids: Vec<Vec<&str>> = subsets
            .iter()
            .map(|s| s.iter().map(|&i| records[i].id.as_str()).collect())
            .collect();
        write_json(&out.join("subsets").join(format!("k{k}.json")), &ids)?;
        subsets_by_k.push((k, subsets));
    }

    let mut tasks = Vec::new();
    for (k, subsets) in &subsets_by_k {
        for (mi, entry) in spec.models.iter().enumerate() {
            for setting in spec.settings(&entry.config)? {
                for (si, subset) in subsets.iter().enumerate() {
                    tasks.push(RunTask {
                        run_id: run_id(&entry.name, *k, &setting, si),
                        model_idx: mi,
                        k: *k,
                        subset_index: si,
                        subset,
                        setting: setting.clone(),
                    });
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<SummaryRow, RunFailure>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let model = &bases[task.model_idx];
                let baseline = &baselines[task.model_idx];
                execute(spec, &config_hash, &records, model, &tokenizer, baseline, task).map_err(|e| RunFailure {
                    run: task.run_id.clone(),
                    error: e.to_string(),
                })
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    write_summary(&out.join(SUMMARY_CSV), &rows)?;
    write_json(&out.join(FAILURES_JSON), &failures)?;
    Ok(SweepOutcome {
        out_dir: out,
        rows,
        failures,
    })
}

fn execute(
    spec: &SweepSpec,
    config_hash: &str,
    records: &[FactRecord],
    model: &Transformer<f32>,
    tokenizer: &Tokenizer,
    baseline: &HashMap<String, usize>,
    task: &RunTask<'_>,
) -> Result<SummaryRow> {
    let started_at = now();
    let dir = spec.out_dir.join("runs").join(&task.run_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let subset: Vec<FactRecord> = task.subset.iter().map(|&i| records[i].clone()).collect();
    let seed = run_seed(spec.seed, &task.run_id);
    let mut cfg = TrainRunConfig {
        seed,
        ..spec.train.clone()
    };
    if let Some(inj) = spec.inject_nan.iter().find(|i| i.run == task.run_id) {
        cfg.inject_nan_at_epoch = Some(inj.epoch);
    }
    let mut manifest = RunManifest {
        run_id: task.run_id.clone(),
        config_hash: config_hash.to_owned(),
        seed,
        model: spec.models[task.model_idx].name.clone(),
        k: task.k,
        n: task.setting.n,
        d: task.setting.d,
        adapter: task.setting.spec.clone(),
        subset_index: task.subset_index,
        fact_ids: subset.iter().map(|r| r.id.clone()).collect(),
        artifacts: RunArtifacts {
            adapter: None,
            trace: None,
            report: None,
        },
        started_at,
        finished_at: started_at,
        status: RunStatus::Ok,
        summary: None,
    };

    let hash_before = model.base_hash();
    let outcome = (|| {
        let (adapter, trace) = train_on_records(model, tokenizer, &task.setting.spec, &subset, &cfg)?;
        adapter.save(&dir.join("adapter.json"))?;
        write_json(&dir.join("trace.json"), &trace)?;
        let report = evaluate_run(
            &task.run_id,
            model,
            tokenizer,
            &adapter,
            &subset,
            trace.final_loss,
            Some(baseline),
            spec,
        )?;
        write_json(&dir.join("report.json"), &report)?;
        Ok::<_, Error>(report)
    })();
    if model.base_hash() != hash_before {
        return Err(Error::validation("base weights changed during adapter training"));
    }
    manifest.finished_at = now();
    let result = match outcome {
        Ok(report) => {
            let row = SummaryRow {
                k: task.k,
                n: task.setting.n,
                d: task.setting.d,
                model: manifest.model.clone(),
                run: task.run_id.clone(),
                accuracy: report.accuracy,
                learning: report.learning,
                final_loss: report.final_loss,
                key_norm: report.key_norm,
                value_norm: report.value_norm,
                mcq_acc: report.mcq_accuracy,
            };
            manifest.artifacts = RunArtifacts {
                adapter: Some("adapter.json".into()),
                trace: Some("trace.json".into()),
                report: Some("report.json".into()),
            };
            manifest.summary = Some(row.clone());
            Ok(row)
        }
        Err(e) => {
            manifest.status = RunStatus::Failed { error: e.to_string() };
            Err(e)
        }
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    result
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "k", "n", "d", "model", "run", "accuracy", "learning", "final_loss", "key_norm", "value_norm", "mcq_acc",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
