//! Train one prefix on five facts and run the whole evaluation suite on it:
//! cloze accuracy, both MCQ modes, prefix norms and the learned/non-learned
//! error analysis.
//!
//! Run with `cargo run --release --example evaluate_adapter`.

use factforge::bench::{synthesize_benchmark, GenEndpointConfig, Generator};
use factforge::eval::{
    error_analysis_stats, mcq_accuracy, prediction_accuracy, prefix_norms, McqItem, McqMode,
};
use factforge::experiment::{novel_facts, obtain_base, train_on_records, ModelEntry};
use factforge::model::{Adapter, PrefixConfig, Tokenizer};
use factforge::train::{AdapterSpec, TrainRunConfig};

fn main() -> factforge::Result<()> {
    let entry = ModelEntry::toy();
    let (model, _) = obtain_base(&entry, &std::env::temp_dir().join("factforge-bases"))?;
    let tok = Tokenizer::bytes();

    let facts = novel_facts(&entry.world.clone().unwrap_or_default(), 5, 21);
    let records = synthesize_benchmark(&facts, &Generator::new(GenEndpointConfig::mock(), 0)?)?.records;
    let spec = AdapterSpec::Prefix(PrefixConfig::new(1, model.config().num_layers, model.config())?);
    let (adapter, trace) = train_on_records(&model, &tok, &spec, &records, &TrainRunConfig::default())?;
    println!("trained on {} facts, final loss {:.4}", records.len(), trace.final_loss);

    // byte tokens: 40 new tokens cover roughly what 10 subword tokens would
    let base = prediction_accuracy(&model, &tok, Adapter::None, &records, 40)?;
    let tuned = prediction_accuracy(&model, &tok, adapter.as_adapter(), &records, 40)?;
    println!("cloze accuracy: base {:.2}, prefix {:.2}", base.accuracy, tuned.accuracy);
    for r in tuned.results.iter().take(5) {
        println!("  [{}] {:?}", if r.correct { "x" } else { " " }, r.generated);
    }

    let items: Vec<McqItem> = records.iter().map(McqItem::from).collect();
    for mode in [McqMode::Choice, McqMode::Completion] {
        let b = mcq_accuracy(&model, &tok, Adapter::None, &items, mode)?;
        let t = mcq_accuracy(&model, &tok, adapter.as_adapter(), &items, mode)?;
        println!("mcq {mode:?}: base {}/{}, prefix {}/{}", b.correct, b.total, t.correct, t.total);
    }

    if let Some(p) = adapter.prefix() {
        let (k, v) = prefix_norms(p);
        println!("prefix norms: keys {k:.3}, values {v:.3}");
    }

    let learned: Vec<bool> = records
        .iter()
        .map(|r| tuned.per_fact_correct.get(&r.id).copied().unwrap_or(0) > 0)
        .collect();
    println!("\nerror analysis (learned = any cloze correct):");
    for row in error_analysis_stats(&records, &learned, &model, &tok)? {
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
        println!(
            "  {:?}/{:?}: non-learned {} learned {} p {}",
            row.set,
            row.statistic,
            f(row.non_learned),
            f(row.learned),
            f(row.p_value)
        );
    }
    Ok(())
}
