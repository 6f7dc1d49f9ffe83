//! Compare analytic prefix and LoRA gradients with central differences at
//! 64-bit.
//!
//! Run with `cargo run --release --example gradient_check`.

use factforge::model::{Adapter, LoraConfig, LoraParams, LoraTarget, ModelConfig, PrefixConfig, PrefixParams, Transformer};

fn main() -> factforge::Result<()> {
    let mc = ModelConfig {
        vocab_size: 32,
        hidden_dim: 8,
        num_layers: 2,
        num_heads: 2,
        ffn_dim: 32,
        max_seq_len: 16,
        seed: 1,
    };
    let model = Transformer::<f64>::new(mc.clone())?;
    let tokens = [3u32, 17, 4, 29, 8, 8, 1, 22];
    let eps = 1e-5;

    let mut prefix = PrefixParams::init(&mc, PrefixConfig::new(2, 2, &mc)?, 3)?;
    let grad = model.backward_prefix(&tokens, &prefix)?;
    let mut worst: f64 = 0.0;
    for i in (0..prefix.keys.len()).step_by(5) {
        let orig = prefix.keys[i];
        prefix.keys[i] = orig + eps;
        let up = model.nll_loss(&tokens, Adapter::Prefix(&prefix))?;
        prefix.keys[i] = orig - eps;
        let down = model.nll_loss(&tokens, Adapter::Prefix(&prefix))?;
        prefix.keys[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let rel = (numeric - grad.keys[i]).abs() / numeric.abs().max(grad.keys[i].abs()).max(1e-8);
        worst = worst.max(rel);
    }
    println!("prefix keys: worst relative error {worst:.2e}");

    let lc = LoraConfig::new(2, 4.0, &[LoraTarget::Query, LoraTarget::Value])?;
    let mut lora = LoraParams::init(&mc, &lc, 5)?;
    // move B off zero so gradients with respect to A are non-trivial
    for pair in lora.pairs_mut() {
        for (j, b) in pair.b.iter_mut().enumerate() {
            *b = 0.05 * ((j % 7) as f64 - 3.0);
        }
    }
    let (_, grads) = model.loss_and_grads(&tokens, Adapter::Lora(&lora), tokens.len() - 1, false)?;
    let analytic = grads.lora.expect("lora gradients");
    let mut worst: f64 = 0.0;
    let pairs = lora.pairs().count();
    for pi in 0..pairs {
        let n = analytic.pairs().nth(pi).map_or(0, |p| p.a.len());
        for i in (0..n).step_by(3) {
            let shifted = |d: f64| -> factforge::Result<f64> {
                let mut l = lora.clone();
                l.pairs_mut().nth(pi).expect("pair").a[i] += d;
                model.nll_loss(&tokens, Adapter::Lora(&l))
            };
            let numeric = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
            let a = analytic.pairs().nth(pi).expect("pair").a[i];
            worst = worst.max((numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-8));
        }
    }
    println!("lora A:      worst relative error {worst:.2e}");
    Ok(())
}
