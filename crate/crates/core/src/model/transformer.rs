//! Pre-LayerNorm decoder-only transformer with an explicit backward pass.
//!
//! Attention in layer `l < d` runs over `n` prefix slots followed by the
//! causal window of real tokens. Prefix slots carry no position and receive
//! no loss; every real token attends to all of them.

use super::config::{LoraTarget, ModelConfig};
use super::lora::LoraParams;
use super::ops::{self, LnCache};
use super::prefix::PrefixParams;
use super::weights::BaseWeights;
use crate::error::{Error, Result};
use crate::num::Real;

/// Which adapter, if any, to run the frozen base with.
#[derive(Debug, Clone, Copy)]
pub enum Adapter<'a, T> {
    None,
    Prefix(&'a PrefixParams<T>),
    Lora(&'a LoraParams<T>),
}

impl<'a, T> Adapter<'a, T> {
    pub fn prefix(p: Option<&'a PrefixParams<T>>) -> Self {
        p.map_or(Adapter::None, Adapter::Prefix)
    }
}

#[derive(Debug, Clone)]
pub struct Transformer<T> {
    config: ModelConfig,
    weights: BaseWeights<T>,
}

/// Activations of one block kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache<T> {
    /// Residual stream entering the block, `[T][h]`.
    pub x_in: Vec<T>,
    ln1: LnCache<T>,
    ln1_out: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    lora_q_ax: Option<Vec<T>>,
    lora_v_ax: Option<Vec<T>>,
    /// Prefix slots attended to in this block (0 above the prefix depth).
    pub prefix_slots: usize,
    /// Attention probabilities `[heads][T][prefix_slots + T]`; causally masked
    /// entries are exactly zero.
    pub probs: Vec<T>,
    ctx: Vec<T>,
    ln2: LnCache<T>,
    ln2_out: Vec<T>,
    ffn_pre: Vec<T>,
    ffn_act: Vec<T>,
}

/// Result of a forward pass: logits plus everything backward needs.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub tokens: Vec<u32>,
    /// `[T][V]`
    pub logits: Vec<T>,
    pub blocks: Vec<BlockCache<T>>,
    /// Residual stream after the last block, `[T][h]`.
    pub x_final: Vec<T>,
    lnf: LnCache<T>,
    lnf_out: Vec<T>,
    vocab: usize,
    heads: usize,
}

impl<T: Real> Forward<T> {
    pub fn seq_len(&self) -> usize {
        self.tokens.len()
    }

    pub fn logits_at(&self, pos: usize) -> &[T] {
        &self.logits[pos * self.vocab..(pos + 1) * self.vocab]
    }

    /// Attention row (prefix columns first) for `head` at query position `pos`
    /// in `layer`.
    pub fn attention_row(&self, layer: usize, head: usize, pos: usize) -> &[T] {
        let b = &self.blocks[layer];
        let width = b.prefix_slots + self.seq_len();
        let base = (head * self.seq_len() + pos) * width;
        &b.probs[base..base + width]
    }

    pub fn num_heads(&self) -> usize {
        self.heads
    }
}

/// Gradients for whichever parameter groups were requested.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub prefix: Option<PrefixParams<T>>,
    pub lora: Option<LoraParams<T>>,
    pub base: Option<BaseWeights<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn add_assign(&mut self, other: &Gradients<T>) {
        fn add<T: Real>(a: &mut [T], b: &[T]) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        if let (Some(a), Some(b)) = (self.prefix.as_mut(), other.prefix.as_ref()) {
            add(&mut a.keys, &b.keys);
            add(&mut a.values, &b.values);
        }
        if let (Some(a), Some(b)) = (self.lora.as_mut(), other.lora.as_ref()) {
            for (pa, pb) in a.pairs_mut().zip(b.pairs()) {
                add(&mut pa.a, &pb.a);
                add(&mut pa.b, &pb.b);
            }
        }
        if let (Some(a), Some(b)) = (self.base.as_mut(), other.base.as_ref()) {
            for (ta, (_, tb)) in a.tensors_mut().into_iter().zip(b.tensors()) {
                add(ta, tb);
            }
        }
    }
}

impl<T: Real> Transformer<T> {
    /// Freshly initialized model from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let weights = BaseWeights::init(&config);
        Ok(Self { config, weights })
    }

    pub fn from_weights(config: ModelConfig, weights: BaseWeights<T>) -> Result<Self> {
        config.validate()?;
        let expect = BaseWeights::<T>::zeros(&config);
        let shapes_match = expect.blocks.len() == weights.blocks.len()
            && expect
                .tensors()
                .iter()
                .zip(weights.tensors())
                .all(|((na, a), (nb, b))| na == &nb && a.len() == b.len());
        if !shapes_match {
            return Err(Error::config("weight shapes do not match model config"));
        }
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn weights(&self) -> &BaseWeights<T> {
        &self.weights
    }

    /// Mutable access for pretraining the base itself. Adapter training never
    /// calls this.
    pub fn weights_mut(&mut self) -> &mut BaseWeights<T> {
        &mut self.weights
    }

    pub fn base_hash(&self) -> String {
        self.weights.content_hash()
    }

    pub fn cast<U: Real>(&self) -> Transformer<U> {
        Transformer {
            config: self.config.clone(),
            weights: self.weights.cast(),
        }
    }

    pub fn forward(&self, tokens: &[u32], prefix: Option<&PrefixParams<T>>) -> Result<Forward<T>> {
        self.forward_with(tokens, Adapter::prefix(prefix))
    }

    fn check_inputs(&self, tokens: &[u32], adapter: Adapter<'_, T>) -> Result<()> {
        let cfg = &self.config;
        if tokens.is_empty() {
            return Err(Error::config("empty token sequence"));
        }
        if tokens.len() > cfg.max_seq_len {
            return Err(Error::config(format!(
                "sequence length {} exceeds max_seq_len {}",
                tokens.len(),
                cfg.max_seq_len
            )));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
            return Err(Error::config(format!("token {t} outside vocabulary")));
        }
        match adapter {
            Adapter::None => Ok(()),
            Adapter::Prefix(p) => p.check_compatible(cfg),
            Adapter::Lora(l) => l.check_compatible(cfg),
        }
    }

    pub fn forward_with(&self, tokens: &[u32], adapter: Adapter<'_, T>) -> Result<Forward<T>> {
        self.check_inputs(tokens, adapter)?;
        let cfg = &self.config;
        let (h, nh, hd, v_size) = (cfg.hidden_dim, cfg.num_heads, cfg.head_dim(), cfg.vocab_size);
        let seq = tokens.len();
        let w = &self.weights;
        let scale = T::one() / T::of(hd as f64).sqrt();

        let mut x = vec![T::zero(); seq * h];
        for (t, &tok) in tokens.iter().enumerate() {
            let row = &mut x[t * h..(t + 1) * h];
            let te = &w.tok_emb[tok as usize * h..(tok as usize + 1) * h];
            let pe = &w.pos_emb[t * h..(t + 1) * h];
            for i in 0..h {
                row[i] = te[i] + pe[i];
            }
        }

        let mut blocks = Vec::with_capacity(cfg.num_layers);
        for (l, blk) in w.blocks.iter().enumerate() {
            let (ln1_out, ln1) = ops::layer_norm(&x, &blk.ln1_g, &blk.ln1_b);
            let mut q = ops::linear(&ln1_out, &blk.wq, h, h);
            let k = ops::linear(&ln1_out, &blk.wk, h, h);
            let mut v = ops::linear(&ln1_out, &blk.wv, h, h);
            let (mut lora_q_ax, mut lora_v_ax) = (None, None);
            if let Adapter::Lora(lora) = adapter {
                let r = lora.config.rank;
                let s = lora.scale();
                let layer = &lora.layers[l];
                if let Some(p) = &layer.query {
                    let ax = ops::linear(&ln1_out, &p.a, h, r);
                    add_scaled(&mut q, &ops::linear(&ax, &p.b, r, h), s);
                    lora_q_ax = Some(ax);
                }
                if let Some(p) = &layer.value {
                    let ax = ops::linear(&ln1_out, &p.a, h, r);
                    add_scaled(&mut v, &ops::linear(&ax, &p.b, r, h), s);
                    lora_v_ax = Some(ax);
                }
            }

            let (pk, pv) = match adapter {
                Adapter::Prefix(p) => (p.layer_keys(l), p.layer_values(l)),
                _ => (None, None),
            };
            let slots = pk.map_or(0, |k| k.len() / h);
            let width = slots + seq;
            let mut probs = vec![T::zero(); nh * seq * width];
            let mut ctx = vec![T::zero(); seq * h];
            for head in 0..nh {
                let off = head * hd;
                for t in 0..seq {
                    let qh = &q[t * h + off..t * h + off + hd];
                    let row_base = (head * seq + t) * width;
                    let row = &mut probs[row_base..row_base + slots + t + 1];
                    if let Some(pk) = pk {
                        for j in 0..slots {
                            row[j] = ops::dot(qh, &pk[j * h + off..j * h + off + hd]) * scale;
                        }
                    }
                    for s in 0..=t {
                        row[slots + s] = ops::dot(qh, &k[s * h + off..s * h + off + hd]) * scale;
                    }
                    ops::softmax_in_place(row);
                    let out = &mut ctx[t * h + off..t * h + off + hd];
                    if let Some(pv) = pv {
                        for j in 0..slots {
                            ops::axpy(row[j], &pv[j * h + off..j * h + off + hd], out);
                        }
                    }
                    for s in 0..=t {
                        ops::axpy(row[slots + s], &v[s * h + off..s * h + off + hd], out);
                    }
                }
            }
            let attn_out = ops::linear(&ctx, &blk.wo, h, h);
            let x_in = std::mem::take(&mut x);
            let mut x_mid = x_in.clone();
            add_scaled(&mut x_mid, &attn_out, T::one());

            let (ln2_out, ln2) = ops::layer_norm(&x_mid, &blk.ln2_g, &blk.ln2_b);
            let mut ffn_pre = ops::linear(&ln2_out, &blk.w1, h, cfg.ffn_dim);
            ops::add_bias(&mut ffn_pre, &blk.b1);
            let ffn_act: Vec<T> = ffn_pre.iter().map(|&z| ops::gelu(z)).collect();
            let mut ffn_out = ops::linear(&ffn_act, &blk.w2, cfg.ffn_dim, h);
            ops::add_bias(&mut ffn_out, &blk.b2);
            x = x_mid;
            add_scaled(&mut x, &ffn_out, T::one());

            blocks.push(BlockCache {
                x_in,
                ln1,
                ln1_out,
                q,
                k,
                v,
                lora_q_ax,
                lora_v_ax,
                prefix_slots: slots,
                probs,
                ctx,
                ln2,
                ln2_out,
                ffn_pre,
                ffn_act,
            });
        }

        let (lnf_out, lnf) = ops::layer_norm(&x, &w.lnf_g, &w.lnf_b);
        let logits = ops::linear(&lnf_out, &w.w_out, h, v_size);
        Ok(Forward {
            tokens: tokens.to_vec(),
            logits,
            blocks,
            x_final: x,
            lnf,
            lnf_out,
            vocab: v_size,
            heads: nh,
        })
    }

    /// Sum of next-token cross-entropies and its gradient w.r.t. the logits,
    /// each position's gradient divided by `denom`.
    pub fn cross_entropy(&self, fwd: &Forward<T>, denom: T) -> (f64, Vec<T>) {
        let v = self.config.vocab_size;
        let seq = fwd.seq_len();
        let mut dlogits = vec![T::zero(); seq * v];
        let mut total = 0.0;
        for t in 0..seq.saturating_sub(1) {
            let target = fwd.tokens[t + 1] as usize;
            let lsm = ops::log_softmax(fwd.logits_at(t));
            total -= lsm[target].f64();
            let d = &mut dlogits[t * v..(t + 1) * v];
            for (i, slot) in d.iter_mut().enumerate() {
                *slot = lsm[i].exp() / denom;
            }
            d[target] -= T::one() / denom;
        }
        (total, dlogits)
    }

    /// Mean next-token negative log-likelihood over the real tokens.
    pub fn nll_loss(&self, tokens: &[u32], adapter: Adapter<'_, T>) -> Result<f64> {
        if tokens.len() < 2 {
            return Err(Error::config("need at least 2 tokens to score a sequence"));
        }
        let fwd = self.forward_with(tokens, adapter)?;
        let (sum, _) = self.cross_entropy(&fwd, T::one());
        Ok(sum / (tokens.len() - 1) as f64)
    }

    /// Summed cross-entropy of `tokens` and gradients of `sum / denom`.
    pub fn loss_and_grads(
        &self,
        tokens: &[u32],
        adapter: Adapter<'_, T>,
        denom: usize,
        base_grads: bool,
    ) -> Result<(f64, Gradients<T>)> {
        if tokens.len() < 2 {
            return Err(Error::config("need at least 2 tokens to score a sequence"));
        }
        let fwd = self.forward_with(tokens, adapter)?;
        let (sum, dlogits) = self.cross_entropy(&fwd, T::of(denom as f64));
        let grads = self.backward(&fwd, &dlogits, adapter, base_grads);
        Ok((sum, grads))
    }

    /// Gradient of the mean next-token NLL w.r.t. the prefix entries only.
    pub fn backward_prefix(&self, tokens: &[u32], prefix: &PrefixParams<T>) -> Result<PrefixParams<T>> {
        let (_, g) = self.loss_and_grads(tokens, Adapter::Prefix(prefix), tokens.len() - 1, false)?;
        Ok(g.prefix.expect("prefix adapter yields prefix gradients"))
    }

    /// Backpropagates `dlogits` through the network. Adapter gradients are
    /// always produced for the active adapter; base gradients only on request.
    pub fn backward(
        &self,
        fwd: &Forward<T>,
        dlogits: &[T],
        adapter: Adapter<'_, T>,
        base_grads: bool,
    ) -> Gradients<T> {
        let cfg = &self.config;
        let (h, nh, hd, f, v_size) = (
            cfg.hidden_dim,
            cfg.num_heads,
            cfg.head_dim(),
            cfg.ffn_dim,
            cfg.vocab_size,
        );
        let seq = fwd.seq_len();
        let w = &self.weights;
        let scale = T::one() / T::of(hd as f64).sqrt();

        let mut gp = match adapter {
            Adapter::Prefix(p) => Some(PrefixParams {
                config: p.config,
                hidden_dim: p.hidden_dim,
                keys: vec![T::zero(); p.keys.len()],
                values: vec![T::zero(); p.values.len()],
            }),
            _ => None,
        };
        let mut gl = match adapter {
            Adapter::Lora(l) => Some(LoraParams::zeros(cfg, &l.config).expect("validated config")),
            _ => None,
        };
        let mut gb = base_grads.then(|| BaseWeights::zeros(cfg));

        // Lowest layer that still needs an input gradient.
        let needs_input_grad_below = |l: usize| l > 0 || base_grads;

        let mut dlnf = vec![T::zero(); seq * h];
        ops::linear_backward_input(dlogits, &w.w_out, h, v_size, &mut dlnf);
        if let Some(g) = gb.as_mut() {
            ops::linear_backward_weight(dlogits, &fwd.lnf_out, h, v_size, &mut g.w_out);
        }
        let mut dx = {
            let dgb = gb.as_mut().map(|g| (&mut g.lnf_g[..], &mut g.lnf_b[..]));
            ops::layer_norm_backward(&dlnf, &fwd.lnf, &w.lnf_g, dgb)
        };

        for l in (0..cfg.num_layers).rev() {
            let blk = &w.blocks[l];
            let c = &fwd.blocks[l];
            let mut gblk = gb.as_mut().map(|g| &mut g.blocks[l]);

            // Feed-forward sublayer.
            let mut d_act = vec![T::zero(); seq * f];
            ops::linear_backward_input(&dx, &blk.w2, f, h, &mut d_act);
            if let Some(g) = gblk.as_mut() {
                ops::sum_rows_into(&dx, &mut g.b2);
                ops::linear_backward_weight(&dx, &c.ffn_act, f, h, &mut g.w2);
            }
            for (d, &z) in d_act.iter_mut().zip(&c.ffn_pre) {
                *d *= ops::gelu_grad(z);
            }
            let mut d_ln2 = vec![T::zero(); seq * h];
            ops::linear_backward_input(&d_act, &blk.w1, h, f, &mut d_ln2);
            if let Some(g) = gblk.as_mut() {
                ops::sum_rows_into(&d_act, &mut g.b1);
                ops::linear_backward_weight(&d_act, &c.ln2_out, h, f, &mut g.w1);
            }
            let dgb = gblk.as_mut().map(|g| (&mut g.ln2_g[..], &mut g.ln2_b[..]));
            let d_mid_ln = ops::layer_norm_backward(&d_ln2, &c.ln2, &blk.ln2_g, dgb);
            let mut d_mid = dx;
            add_scaled(&mut d_mid, &d_mid_ln, T::one());

            // Attention sublayer.
            let mut d_ctx = vec![T::zero(); seq * h];
            ops::linear_backward_input(&d_mid, &blk.wo, h, h, &mut d_ctx);
            if let Some(g) = gblk.as_mut() {
                ops::linear_backward_weight(&d_mid, &c.ctx, h, h, &mut g.wo);
            }

            let slots = c.prefix_slots;
            let width = slots + seq;
            let (pk, pv) = match adapter {
                Adapter::Prefix(p) => (p.layer_keys(l), p.layer_values(l)),
                _ => (None, None),
            };
            let stride = slots * h;
            let (mut gpk, mut gpv) = match gp.as_mut() {
                Some(g) if slots > 0 => (
                    Some(&mut g.keys[l * stride..(l + 1) * stride]),
                    Some(&mut g.values[l * stride..(l + 1) * stride]),
                ),
                _ => (None, None),
            };
            let mut dq = vec![T::zero(); seq * h];
            let mut dk = vec![T::zero(); seq * h];
            let mut dv = vec![T::zero(); seq * h];
            let mut ds = vec![T::zero(); width];
            for head in 0..nh {
                let off = head * hd;
                for t in 0..seq {
                    let row_base = (head * seq + t) * width;
                    let p = &c.probs[row_base..row_base + slots + t + 1];
                    let dctx = &d_ctx[t * h + off..t * h + off + hd];
                    let mut weighted = T::zero();
                    for j in 0..slots {
                        let vj = &pv.expect("prefix values")[j * h + off..j * h + off + hd];
                        let da = ops::dot(dctx, vj);
                        ds[j] = da;
                        weighted += p[j] * da;
                        if let Some(g) = gpv.as_mut() {
                            ops::axpy(p[j], dctx, &mut g[j * h + off..j * h + off + hd]);
                        }
                    }
                    for s in 0..=t {
                        let da = ops::dot(dctx, &c.v[s * h + off..s * h + off + hd]);
                        ds[slots + s] = da;
                        weighted += p[slots + s] * da;
                        ops::axpy(p[slots + s], dctx, &mut dv[s * h + off..s * h + off + hd]);
                    }
                    let qh = &c.q[t * h + off..t * h + off + hd];
                    let dqh = &mut dq[t * h + off..t * h + off + hd];
                    for j in 0..slots {
                        let g = p[j] * (ds[j] - weighted) * scale;
                        let kj = &pk.expect("prefix keys")[j * h + off..j * h + off + hd];
                        ops::axpy(g, kj, dqh);
                        if let Some(gk) = gpk.as_mut() {
                            ops::axpy(g, qh, &mut gk[j * h + off..j * h + off + hd]);
                        }
                    }
                    for s in 0..=t {
                        let g = p[slots + s] * (ds[slots + s] - weighted) * scale;
                        ops::axpy(g, &c.k[s * h + off..s * h + off + hd], dqh);
                        ops::axpy(g, qh, &mut dk[s * h + off..s * h + off + hd]);
                    }
                }
            }

            let want_lora = gl.is_some();
            if !needs_input_grad_below(l) && !want_lora {
                dx = Vec::new();
                break;
            }

            let mut d_ln1 = vec![T::zero(); seq * h];
            ops::linear_backward_input(&dq, &blk.wq, h, h, &mut d_ln1);
            ops::linear_backward_input(&dk, &blk.wk, h, h, &mut d_ln1);
            ops::linear_backward_input(&dv, &blk.wv, h, h, &mut d_ln1);
            if let Some(g) = gblk.as_mut() {
                ops::linear_backward_weight(&dq, &c.ln1_out, h, h, &mut g.wq);
                ops::linear_backward_weight(&dk, &c.ln1_out, h, h, &mut g.wk);
                ops::linear_backward_weight(&dv, &c.ln1_out, h, h, &mut g.wv);
            }
            if let (Adapter::Lora(lora), Some(glora)) = (adapter, gl.as_mut()) {
                let r = lora.config.rank;
                let s = lora.scale();
                for (target, dy, ax) in [
                    (LoraTarget::Query, &dq, &c.lora_q_ax),
                    (LoraTarget::Value, &dv, &c.lora_v_ax),
                ] {
                    let (Some(pair), Some(ax)) = (lora.layers[l].pair(target), ax.as_ref()) else {
                        continue;
                    };
                    let gpair = glora.layers[l].pair_mut(target).expect("matching targets");
                    let dy_s: Vec<T> = dy.iter().map(|&g| g * s).collect();
                    ops::linear_backward_weight(&dy_s, ax, r, h, &mut gpair.b);
                    let mut d_ax = vec![T::zero(); seq * r];
                    ops::linear_backward_input(&dy_s, &pair.b, r, h, &mut d_ax);
                    ops::linear_backward_weight(&d_ax, &c.ln1_out, h, r, &mut gpair.a);
                    ops::linear_backward_input(&d_ax, &pair.a, h, r, &mut d_ln1);
                }
            }
            if !needs_input_grad_below(l) {
                dx = Vec::new();
                break;
            }
            let dgb = gblk.as_mut().map(|g| (&mut g.ln1_g[..], &mut g.ln1_b[..]));
            let d_in_ln = ops::layer_norm_backward(&d_ln1, &c.ln1, &blk.ln1_g, dgb);
            dx = d_mid;
            add_scaled(&mut dx, &d_in_ln, T::one());
        }

        if let Some(g) = gb.as_mut() {
            for (t, &tok) in fwd.tokens.iter().enumerate() {
                let d = &dx[t * h..(t + 1) * h];
                ops::axpy(T::one(), d, &mut g.tok_emb[tok as usize * h..(tok as usize + 1) * h]);
                ops::axpy(T::one(), d, &mut g.pos_emb[t * h..(t + 1) * h]);
            }
        }

        Gradients {
            prefix: gp,
            lora: gl,
            base: gb,
        }
    }
}

fn add_scaled<T: Real>(dst: &mut [T], src: &[T], s: T) {
    for (d, &x) in dst.iter_mut().zip(src) {
        *d += s * x;
    }
}
