use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use crate::num::Real;

/// Weights of one transformer block. Linear maps are stored row-major as
/// `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights<T> {
    pub ln1_g: Vec<T>,
    pub ln1_b: Vec<T>,
    pub wq: Vec<T>,
    pub wk: Vec<T>,
    pub wv: Vec<T>,
    pub wo: Vec<T>,
    pub ln2_g: Vec<T>,
    pub ln2_b: Vec<T>,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseWeights<T> {
    pub tok_emb: Vec<T>,
    pub pos_emb: Vec<T>,
    pub blocks: Vec<BlockWeights<T>>,
    pub lnf_g: Vec<T>,
    pub lnf_b: Vec<T>,
    pub w_out: Vec<T>,
}

impl<T: Real> BaseWeights<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden_dim;
        let f = cfg.ffn_dim;
        let z = |n: usize| vec![T::zero(); n];
        Self {
            tok_emb: z(cfg.vocab_size * h),
            pos_emb: z(cfg.max_seq_len * h),
            blocks: (0..cfg.num_layers)
                .map(|_| BlockWeights {
                    ln1_g: z(h),
                    ln1_b: z(h),
                    wq: z(h * h),
                    wk: z(h * h),
                    wv: z(h * h),
                    wo: z(h * h),
                    ln2_g: z(h),
                    ln2_b: z(h),
                    w1: z(f * h),
                    b1: z(f),
                    w2: z(h * f),
                    b2: z(h),
                })
                .collect(),
            lnf_g: z(h),
            lnf_b: z(h),
            w_out: z(cfg.vocab_size * h),
        }
    }

    /// GPT-2 style initialization: N(0, 0.02) everywhere, residual output
    /// projections scaled by 1/sqrt(2L), unit layer-norm gains.
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut w = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, 0.02).unwrap();
        let resid = Normal::new(0.0, 0.02 / (2.0 * cfg.num_layers as f64).sqrt()).unwrap();
        let fill = |v: &mut Vec<T>, d: &Normal<f64>, rng: &mut ChaCha8Rng| {
            for x in v.iter_mut() {
                *x = T::of(d.sample(rng));
            }
        };
        fill(&mut w.tok_emb, &normal, &mut rng);
        fill(&mut w.pos_emb, &normal, &mut rng);
        for b in &mut w.blocks {
            b.ln1_g.fill(T::one());
            b.ln2_g.fill(T::one());
            fill(&mut b.wq, &normal, &mut rng);
            fill(&mut b.wk, &normal, &mut rng);
            fill(&mut b.wv, &normal, &mut rng);
            fill(&mut b.wo, &resid, &mut rng);
            fill(&mut b.w1, &normal, &mut rng);
            fill(&mut b.w2, &resid, &mut rng);
        }
        w.lnf_g.fill(T::one());
        fill(&mut w.w_out, &normal, &mut rng);
        w
    }

    /// Named tensors in a fixed canonical order.
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = vec![
            ("tok_emb".into(), &self.tok_emb),
            ("pos_emb".into(), &self.pos_emb),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            let p = |n: &str| format!("blocks.{i}.{n}");
            out.push((p("ln1_g"), &b.ln1_g));
            out.push((p("ln1_b"), &b.ln1_b));
            out.push((p("wq"), &b.wq));
            out.push((p("wk"), &b.wk));
            out.push((p("wv"), &b.wv));
            out.push((p("wo"), &b.wo));
            out.push((p("ln2_g"), &b.ln2_g));
            out.push((p("ln2_b"), &b.ln2_b));
            out.push((p("w1"), &b.w1));
            out.push((p("b1"), &b.b1));
            out.push((p("w2"), &b.w2));
            out.push((p("b2"), &b.b2));
        }
        out.push(("lnf_g".into(), &self.lnf_g));
        out.push(("lnf_b".into(), &self.lnf_b));
        out.push(("w_out".into(), &self.w_out));
        out
    }

    /// Same order as [`BaseWeights::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out: Vec<&mut Vec<T>> = vec![&mut self.tok_emb, &mut self.pos_emb];
        for b in &mut self.blocks {
            out.extend([
                &mut b.ln1_g,
                &mut b.ln1_b,
                &mut b.wq,
                &mut b.wk,
                &mut b.wv,
                &mut b.wo,
                &mut b.ln2_g,
                &mut b.ln2_b,
                &mut b.w1,
                &mut b.b1,
                &mut b.w2,
                &mut b.b2,
            ]);
        }
        out.extend([&mut self.lnf_g, &mut self.lnf_b, &mut self.w_out]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// SHA-256 over the little-endian bytes of every tensor in canonical order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, t) in self.tensors() {
            hasher.update(name.as_bytes());
            hasher.update((t.len() as u64).to_le_bytes());
            for x in t {
                hasher.update(x.f64().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn cast<U: Real>(&self) -> BaseWeights<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        BaseWeights {
            tok_emb: c(&self.tok_emb),
            pos_emb: c(&self.pos_emb),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockWeights {
                    ln1_g: c(&b.ln1_g),
                    ln1_b: c(&b.ln1_b),
                    wq: c(&b.wq),
                    wk: c(&b.wk),
                    wv: c(&b.wv),
                    wo: c(&b.wo),
                    ln2_g: c(&b.ln2_g),
                    ln2_b: c(&b.ln2_b),
                    w1: c(&b.w1),
                    b1: c(&b.b1),
                    w2: c(&b.w2),
                    b2: c(&b.b2),
                })
                .collect(),
            lnf_g: c(&self.lnf_g),
            lnf_b: c(&self.lnf_b),
            w_out: c(&self.w_out),
        }
    }
}
