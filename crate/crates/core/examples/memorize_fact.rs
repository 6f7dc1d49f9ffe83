//! Pretrain the toy model on a synthetic world, then store single novel facts
//! in a one-token full-depth prefix and read them back with greedy decoding.
//!
//! Run with `cargo run --release --example memorize_fact [facts]`. The first
//! run pretrains the base (a few minutes on one core) and caches it in the
//! system temp directory.

use std::time::Instant;

use factforge::bench::mock;
use factforge::experiment::{novel_facts, obtain_base, ModelEntry};
use factforge::model::{Adapter, PrefixConfig, Tokenizer};
use factforge::train::{train_on_sentences, AdapterSpec, TrainRunConfig};

fn main() -> factforge::Result<()> {
    let count: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let entry = ModelEntry::toy();
    let t0 = Instant::now();
    let (model, path) = obtain_base(&entry, &std::env::temp_dir().join("factforge-bases"))?;
    println!("base {} ready in {:.0}s", path.display(), t0.elapsed().as_secs_f64());

    let tok = Tokenizer::bytes();
    let spec = AdapterSpec::Prefix(PrefixConfig::new(1, model.config().num_layers, model.config())?);
    let world = entry.world.clone().unwrap_or_default();
    for (i, fact) in novel_facts(&world, count, 99).iter().enumerate() {
        let sentence = mock::training_sentence(fact);
        let cfg = TrainRunConfig {
            seed: i as u64,
            ..Default::default()
        };
        let (adapter, trace) = train_on_sentences(&model, &tok, &spec, &[sentence.clone()], &cfg)?;
        let stem = tok.encode(&mock::training_stem(fact))?;
        let before = model.generate_greedy(&stem, Adapter::None, 30)?;
        let after = model.generate_greedy(&stem, adapter.as_adapter(), 30)?;
        println!("\n{sentence}");
        println!("  loss {:.4} after {} epochs", trace.final_loss, trace.epochs_run);
        println!("  base  : {:?}", tok.decode(&before[stem.len()..]));
        println!("  prefix: {:?}", tok.decode(&after[stem.len()..]));
    }
    Ok(())
}
