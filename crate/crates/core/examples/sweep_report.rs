//! A small sweep over k and prefix depth, its aggregate report and the MCQ
//! regression check, all driven by one TOML config.
//!
//! Run with `cargo run --release --example sweep_report`.

use factforge::bench::{synthesize_benchmark, write_synthesis, GenEndpointConfig, Generator, DATASET_FILE};
use factforge::eval::{McqItem, McqMode};
use factforge::experiment::{novel_facts, obtain_base, regress_sweep, run_sweep, write_report, ModelEntry, SweepSpec};

const CONFIG: &str = r#"
k_values = [1, 5]
prefix_n = [1]
prefix_d = [1, "full"]
max_runs_per_k = 3
seed = 4

[eval]
num_new_tokens = 40

[train]
max_epochs = 300
"#;

fn main() -> factforge::Result<()> {
    let dir = std::env::temp_dir().join("factforge-sweep-example");
    let _ = std::fs::remove_dir_all(&dir);

    let mut entry = ModelEntry::toy();
    let (_, base) = obtain_base(&entry, &std::env::temp_dir().join("factforge-bases"))?;
    entry.checkpoint = Some(base);
    let facts = novel_facts(&entry.world.clone().unwrap_or_default(), 20, 5);
    let syn = synthesize_benchmark(&facts, &Generator::new(GenEndpointConfig::mock(), 0)?)?;
    write_synthesis(&dir.join("bench"), &syn)?;

    let overrides = [
        format!("dataset={:?}", dir.join("bench").join(DATASET_FILE)),
        format!("out_dir={:?}", dir.join("sweep")),
    ];
    let mut spec = SweepSpec::from_toml_str(CONFIG, &overrides)?;
    spec.models = vec![entry];

    let outcome = run_sweep(&spec)?;
    println!("{} runs, {} failures", outcome.rows.len(), outcome.failures.len());
    for r in &outcome.rows {
        println!("  {:<24} acc {:.2} loss {:.4} learning {:?}", r.run, r.accuracy, r.final_loss, r.learning);
    }

    println!("\nk  d  runs  acc (95% CI)          pLM   median loss  p vs d=1");
    for a in write_report(&outcome.out_dir)? {
        println!(
            "{:<2} {:<2} {:<5} {:.2} ({:.2}, {:.2})     {:<5} {:<12.4} {}",
            a.k,
            a.d,
            a.runs,
            a.acc_mean,
            a.acc_ci_lo,
            a.acc_ci_hi,
            a.plm.map_or("-".into(), |p| format!("{p:.2}")),
            a.loss_median,
            a.acc_p.map_or("-".into(), |p| format!("{p:.3}")),
        );
    }

    // a fixed question set scored with and without each sampled prefix
    let items: Vec<McqItem> = syn.records.iter().map(McqItem::from).collect();
    println!("\nregression on {} questions:", items.len());
    for r in regress_sweep(&outcome.out_dir, &items, McqMode::Choice, 2, 0)? {
        println!("  {:<24} base {:.2} prefix {:.2}", r.run, r.base_acc, r.tuned_acc);
    }
    println!("\nartifacts in {}", outcome.out_dir.display());
    Ok(())
}
