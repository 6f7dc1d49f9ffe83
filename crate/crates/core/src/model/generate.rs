use super::transformer::{Adapter, Transformer};
use crate::error::{Error, Result};
use crate::num::Real;

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl<T: Real> Transformer<T> {
    /// Appends exactly `num_new` tokens by repeated argmax. The prompt plus the
    /// new tokens must fit in the context window.
    pub fn generate_greedy(
        &self,
        prompt: &[u32],
        adapter: Adapter<'_, T>,
        num_new: usize,
    ) -> Result<Vec<u32>> {
        if prompt.is_empty() {
            return Err(Error::config("generation prompt must be non-empty"));
        }
        let max = self.config().max_seq_len;
        if prompt.len() + num_new > max {
            return Err(Error::config(format!(
                "prompt length {} plus {num_new} new tokens exceeds max_seq_len {max}",
                prompt.len()
            )));
        }
        let mut tokens = prompt.to_vec();
        for _ in 0..num_new {
            let fwd = self.forward_with(&tokens, adapter)?;
            let next = argmax(fwd.logits_at(tokens.len() - 1));
            tokens.push(next as u32);
        }
        Ok(tokens)
    }

    /// Per-token perplexity `exp(nll)` of a whole sequence.
    pub fn sequence_perplexity(&self, tokens: &[u32], adapter: Adapter<'_, T>) -> Result<f64> {
        Ok(self.nll_loss(tokens, adapter)?.exp())
    }

    /// Mean NLL of `tokens[start..]` given everything before it, i.e. the
    /// per-token loss of a continuation. `start` must be ≥ 1.
    pub fn continuation_nll(
        &self,
        tokens: &[u32],
        start: usize,
        adapter: Adapter<'_, T>,
    ) -> Result<f64> {
        if start == 0 || start >= tokens.len() {
            return Err(Error::config(format!(
                "continuation start {start} outside (0, {})",
                tokens.len()
            )));
        }
        let fwd = self.forward_with(tokens, adapter)?;
        let mut total = 0.0;
        for t in start - 1..tokens.len() - 1 {
            let lsm = super::ops::log_softmax(fwd.logits_at(t));
            total -= lsm[tokens[t + 1] as usize].f64();
        }
        Ok(total / (tokens.len() - start) as f64)
    }
}
