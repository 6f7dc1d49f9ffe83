//! Analytic gradients against central finite differences at 64-bit.

use factforge::model::{
    Adapter, LoraConfig, LoraParams, LoraTarget, ModelConfig, PrefixConfig, PrefixParams,
    Transformer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn small() -> ModelConfig {
    ModelConfig {
        vocab_size: 32,
        hidden_dim: 8,
        num_layers: 2,
        num_heads: 2,
        ffn_dim: 32,
        max_seq_len: 16,
        seed: 11,
    }
}

/// Larger-than-default weights so the loss surface is not nearly flat.
fn model() -> Transformer<f64> {
    let mut m = Transformer::<f64>::new(small()).unwrap();
    for t in m.weights_mut().tensors_mut() {
        for x in t.iter_mut() {
            *x *= 10.0;
        }
    }
    m
}

fn tokens() -> Vec<u32> {
    vec![3, 17, 4, 29, 8, 8, 1, 22]
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn check(name: &str, analytic: f64, mut loss_at: impl FnMut(f64) -> f64, x0: f64) {
    let fd = (loss_at(x0 + STEP) - loss_at(x0 - STEP)) / (2.0 * STEP);
    let err = rel_err(analytic, fd);
    assert!(
        err <= TOL || (analytic - fd).abs() < 1e-9,
        "{name}: analytic {analytic:e} vs fd {fd:e} (rel {err:e})"
    );
}

#[test]
fn prefix_gradients_every_entry() {
    let m = model();
    let toks = tokens();
    for (n, d) in [(1, 1), (2, 2)] {
        let mut p = PrefixParams::<f64>::init(m.config(), PrefixConfig { n, d }, 5).unwrap();
        for x in p.keys.iter_mut().chain(p.values.iter_mut()) {
            *x *= 20.0;
        }
        let g = m.backward_prefix(&toks, &p).unwrap();
        for i in 0..p.keys.len() {
            let x0 = p.keys[i];
            let mut q = p.clone();
            check(
                &format!("key[{i}] n={n} d={d}"),
                g.keys[i],
                |x| {
                    q.keys[i] = x;
                    m.nll_loss(&toks, Adapter::Prefix(&q)).unwrap()
                },
                x0,
            );
            let x0 = p.values[i];
            let mut q = p.clone();
            check(
                &format!("value[{i}] n={n} d={d}"),
                g.values[i],
                |x| {
                    q.values[i] = x;
                    m.nll_loss(&toks, Adapter::Prefix(&q)).unwrap()
                },
                x0,
            );
        }
    }
}

#[test]
fn lora_gradients_every_entry() {
    let m = model();
    let toks = tokens();
    let lc = LoraConfig::new(2, 4.0, &[LoraTarget::Query, LoraTarget::Value]).unwrap();
    let mut lora = LoraParams::<f64>::init(m.config(), &lc, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in lora.pairs_mut() {
        for x in &mut p.b {
            *x = rng.random_range(-0.5..0.5);
        }
    }
    let (_, g) = m
        .loss_and_grads(&toks, Adapter::Lora(&lora), toks.len() - 1, false)
        .unwrap();
    let g = g.lora.unwrap();
    let n_pairs = lora.pairs().count();
    for pi in 0..n_pairs {
        for which in 0..2 {
            let len = if which == 0 { lora.pairs().nth(pi).unwrap().a.len() } else { lora.pairs().nth(pi).unwrap().b.len() };
            for i in 0..len {
                let pick = |l: &LoraParams<f64>| {
                    let p = l.pairs().nth(pi).unwrap();
                    if which == 0 { p.a[i] } else { p.b[i] }
                };
                let analytic = pick(&g);
                let x0 = pick(&lora);
                let mut q = lora.clone();
                check(
                    &format!("lora pair {pi} {} [{i}]", if which == 0 { "A" } else { "B" }),
                    analytic,
                    |x| {
                        let p = q.pairs_mut().nth(pi).unwrap();
                        if which == 0 { p.a[i] = x } else { p.b[i] = x }
                        m.nll_loss(&toks, Adapter::Lora(&q)).unwrap()
                    },
                    x0,
                );
            }
        }
    }
}

#[test]
fn base_gradients_sampled() {
    let m = model();
    let toks = tokens();
    let (_, g) = m
        .loss_and_grads(&toks, Adapter::None, toks.len() - 1, true)
        .unwrap();
    let g = g.base.unwrap();
    let grads: Vec<(String, Vec<f64>)> = g.tensors().into_iter().map(|(n, t)| (n, t.to_vec())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (ti, (name, gt)) in grads.iter().enumerate() {
        for _ in 0..6 {
            let i = rng.random_range(0..gt.len());
            // Embedding rows of unused tokens legitimately have zero gradient.
            let x0 = m.weights().tensors()[ti].1[i];
            let mut mm = m.clone();
            check(
                &format!("{name}[{i}]"),
                gt[i],
                |x| {
                    mm.weights_mut().tensors_mut()[ti][i] = x;
                    mm.nll_loss(&toks, Adapter::None).unwrap()
                },
                x0,
            );
        }
    }
}
