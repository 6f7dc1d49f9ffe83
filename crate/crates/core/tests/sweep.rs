//! Sweep bookkeeping, determinism, failure isolation, reports and regression.

use std::fs;
use std::path::{Path, PathBuf};

use factforge::bench::{synthesize_benchmark, write_synthesis, GenEndpointConfig, Generator, DATASET_FILE};
use factforge::eval::{McqItem, McqMode};
use factforge::experiment::{
    novel_facts, read_summary, regress_sweep, run_sweep, write_report, Depth, ModelEntry, NanInjection, SweepSpec,
    WorldBase, SUMMARY_CSV,
};
use factforge::model::checkpoint::save_base;
use factforge::model::{ModelConfig, Transformer};
use factforge::train::TrainRunConfig;

fn tiny() -> ModelConfig {
    ModelConfig {
        vocab_size: 256,
        hidden_dim: 16,
        num_layers: 2,
        num_heads: 2,
        ffn_dim: 32,
        max_seq_len: 128,
        seed: 5,
    }
}

/// A mock benchmark of `facts` records plus a random-init base checkpoint.
fn fixture(dir: &Path, facts: usize) -> (PathBuf, PathBuf) {
    let triples = novel_facts(&WorldBase::default(), facts, 3);
    let syn = synthesize_benchmark(&triples, &Generator::new(GenEndpointConfig::mock(), 0).unwrap()).unwrap();
    assert_eq!(syn.records.len(), facts);
    let bench = dir.join("bench");
    write_synthesis(&bench, &syn).unwrap();
    let base = dir.join("tiny.json");
    save_base(&Transformer::<f32>::new(tiny()).unwrap(), &base).unwrap();
    (bench.join(DATASET_FILE), base)
}

fn spec(dataset: &Path, base: &Path, out: &Path) -> SweepSpec {
    SweepSpec {
        dataset: dataset.to_owned(),
        out_dir: out.to_owned(),
        k_values: vec![1],
        models: vec![ModelEntry {
            name: "tiny".into(),
            config: tiny(),
            checkpoint: Some(base.to_owned()),
            world: None,
        }],
        train: TrainRunConfig {
            max_epochs: 5,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn five_singletons_give_five_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, base) = fixture(dir.path(), 5);
    let out = dir.path().join("sweep");
    let outcome = run_sweep(&spec(&data, &base, &out)).unwrap();
    assert_eq!(outcome.rows.len(), 5);
    assert!(outcome.failures.is_empty());
    let runs: Vec<_> = fs::read_dir(out.join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 5);
    for r in runs {
        let p = r.unwrap().path();
        for f in ["manifest.json", "adapter.json", "trace.json", "report.json"] {
            assert!(p.join(f).is_file(), "{} missing {f}", p.display());
        }
    }
    assert_eq!(read_summary(&out.join(SUMMARY_CSV)).unwrap(), outcome.rows);
    let header = fs::read_to_string(out.join(SUMMARY_CSV)).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        "k,n,d,model,run,accuracy,learning,final_loss,key_norm,value_norm,mcq_acc"
    );
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, base) = fixture(dir.path(), 5);
    let mut s = spec(&data, &base, &dir.path().join("a"));
    s.prefix_d = vec![Depth::Layers(1), Depth::FULL];
    run_sweep(&s).unwrap();
    s.out_dir = dir.path().join("b");
    run_sweep(&s).unwrap();
    let a = fs::read(dir.path().join("a").join(SUMMARY_CSV)).unwrap();
    let b = fs::read(dir.path().join("b").join(SUMMARY_CSV)).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 11);
}

#[test]
fn nan_run_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let (data, base) = fixture(dir.path(), 5);
    let out = dir.path().join("sweep");
    let mut s = spec(&data, &base, &out);
    s.inject_nan = vec![NanInjection {
        run: "tiny-k1-n1-d1-s002".into(),
        epoch: 1,
    }];
    let outcome = run_sweep(&s).unwrap();
    assert_eq!(outcome.rows.len(), 4);
    assert_eq!(outcome.failures.len(), 1);
    assert_eq!(outcome.failures[0].run, "tiny-k1-n1-d1-s002");
    assert!(!outcome.all_failed());
    let failures: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("failures.json")).unwrap()).unwrap();
    assert_eq!(failures.as_array().unwrap().len(), 1);
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(out.join("runs/tiny-k1-n1-d1-s002/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["status"], "failed");

    // the report only sees the four finished runs
    let agg = write_report(&out).unwrap();
    assert_eq!(agg.len(), 1);
    assert_eq!(agg[0].runs, 4);
    assert!(out.join("aggregates.csv").is_file());
}

#[test]
fn all_failed_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let (data, base) = fixture(dir.path(), 5);
    let mut s = spec(&data, &base, &dir.path().join("sweep"));
    s.inject_nan = (0..5)
        .map(|i| NanInjection {
            run: format!("tiny-k1-n1-d1-s{i:03}"),
            epoch: 0,
        })
        .collect();
    let outcome = run_sweep(&s).unwrap();
    assert!(outcome.all_failed());
    assert!(write_report(&dir.path().join("sweep")).is_err());
}

#[test]
fn k_above_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (data, base) = fixture(dir.path(), 5);
    let mut s = spec(&data, &base, &dir.path().join("sweep"));
    s.k_values = vec![1, 6];
    assert!(run_sweep(&s).is_err());
}

#[test]
fn regression_samples_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, base) = fixture(dir.path(), 6);
    let out = dir.path().join("sweep");
    let mut s = spec(&data, &base, &out);
    s.k_values = vec![1, 2];
    s.eval.mcq = false;
    run_sweep(&s).unwrap();
    let items = vec![McqItem {
        question: "What colour is the sky?".into(),
        choices: vec!["blue".into(), "green".into(), "red".into(), "black".into()],
        answer_index: 0,
    }];
    let rows = regress_sweep(&out, &items, McqMode::Choice, 5, 1).unwrap();
    assert_eq!(rows.iter().filter(|r| r.k == 1).count(), 5);
    // six facts give only five subsets of two
    assert_eq!(rows.iter().filter(|r| r.k == 2).count(), 5);
    assert!(rows.iter().all(|r| (r.delta - (r.tuned_acc - r.base_acc)).abs() < 1e-12));
}
