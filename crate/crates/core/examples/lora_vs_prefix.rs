//! Parameter budgets of prefixes and LoRA, and one LoRA run on the same
//! sentences a prefix is trained on.
//!
//! Run with `cargo run --release --example lora_vs_prefix`.

use factforge::model::{
    lora_param_count, prefix_param_count, LoraConfig, LoraTarget, ModelConfig, PrefixConfig, Tokenizer, Transformer,
};
use factforge::train::{train_on_sentences, AdapterSpec, TrainRunConfig};

fn main() -> factforge::Result<()> {
    let big = ModelConfig::bloomz_7b1();
    let qv = [LoraTarget::Query, LoraTarget::Value];
    let lora = lora_param_count(&big, &LoraConfig::new(8, 8.0, &qv)?);
    println!("7b1-sized model, LoRA r=8 on query/value: {lora} parameters");
    for (n, d) in [(1, 1), (1, 30), (10, 30), (100, 30)] {
        let p = prefix_param_count(&big, &PrefixConfig::new(n, d, &big)?);
        let rel = if p <= lora {
            format!("{:.1}x fewer", lora as f64 / p as f64)
        } else {
            format!("{:.1}x more", p as f64 / lora as f64)
        };
        println!("  prefix n={n:<3} d={d:<2}: {p:>9} parameters ({rel})");
    }

    // a small random base is enough to compare optimisation behaviour
    let mc = ModelConfig {
        hidden_dim: 32,
        num_layers: 2,
        num_heads: 2,
        ffn_dim: 64,
        ..ModelConfig::toy()
    };
    let model = Transformer::<f32>::new(mc.clone())?;
    let sentences = vec![
        "Ada Berg was born in Oslo.".to_string(),
        "Chen Lin works as a writer.".to_string(),
    ];
    let cfg = TrainRunConfig {
        max_epochs: 150,
        ..Default::default()
    };
    let specs = [
        ("prefix n=1 d=2", AdapterSpec::Prefix(PrefixConfig::new(1, 2, &mc)?)),
        ("prefix n=8 d=2", AdapterSpec::Prefix(PrefixConfig::new(8, 2, &mc)?)),
        ("lora r=4 q,v  ", AdapterSpec::Lora(LoraConfig::new(4, 8.0, &qv)?)),
    ];
    println!();
    for (name, spec) in &specs {
        let (adapter, trace) = train_on_sentences(&model, &Tokenizer::bytes(), spec, &sentences, &cfg)?;
        println!(
            "{name}: {:>5} params, loss {:.3} -> {:.3}",
            adapter.num_params(),
            trace.epoch_losses[0],
            trace.final_loss
        );
    }
    Ok(())
}
