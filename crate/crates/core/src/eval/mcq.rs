use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{prompts, FactRecord, NUM_CHOICES};
use crate::error::{Error, Result};
use crate::model::{Adapter, Tokenizer, Transformer};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    /// Question (choice mode) or sentence stem (completion mode).
    pub question: String,
    pub choices: Vec<String>,
    pub answer_index: usize,
}

impl McqItem {
    pub fn validate(&self) -> Result<()> {
        if self.choices.len() != NUM_CHOICES || self.answer_index >= NUM_CHOICES {
            return Err(Error::validation(format!(
                "MCQ item needs {NUM_CHOICES} choices and a valid answer index: {:?}",
                self.question
            )));
        }
        Ok(())
    }
}

impl From<&FactRecord> for McqItem {
    fn from(r: &FactRecord) -> Self {
        McqItem {
            question: r.question.clone(),
            choices: r.choices.clone(),
            answer_index: r.answer_index,
        }
    }
}

pub fn read_mcq_jsonl<R: BufRead>(source: R) -> Result<Vec<McqItem>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("<mcq line {}>", i + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: McqItem =
            serde_json::from_str(&line).map_err(|e| Error::validation(format!("mcq line {}: {e}", i + 1)))?;
        item.validate()?;
        out.push(item);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McqMode {
    /// Perplexity of the answer string after the pinned question prompt.
    Choice,
    /// Perplexity of stem plus completion as one sequence.
    Completion,
}

/// Index of the smallest score; ties and NaNs resolve to the lowest index.
pub fn argmin_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] || scores[best].is_nan() && !s.is_nan() {
            best = i;
        }
    }
    best
}

/// Keeps the last `max` tokens, moving the continuation start accordingly.
fn fit_window(tokens: &[u32], start: usize, max: usize) -> (&[u32], usize) {
    if tokens.len() <= max {
        return (tokens, start);
    }
    let drop = tokens.len() - max;
    (&tokens[drop..], start.saturating_sub(drop).max(1))
}

/// Per-token perplexity of each choice after the shared MCQ prompt.
pub fn choice_perplexities<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    adapter: Adapter<'_, T>,
    item: &McqItem,
) -> Result<Vec<f64>> {
    let prompt = prompts::mcq_prompt(&item.question);
    let start = tokenizer.encode(&prompt)?.len();
    item.choices
        .iter()
        .map(|c| {
            let tokens = tokenizer.encode(&format!("{prompt} {c}"))?;
            let (window, start) = fit_window(&tokens, start, model.config().max_seq_len);
            Ok(model.continuation_nll(window, start, adapter)?.exp())
        })
        .collect()
}

/// Per-token perplexity of `stem + " " + completion` for each choice.
pub fn completion_perplexities<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    adapter: Adapter<'_, T>,
    item: &McqItem,
) -> Result<Vec<f64>> {
    item.choices
        .iter()
        .map(|c| {
            let tokens = tokenizer.encode(&format!("{} {c}", item.question))?;
            let (window, _) = fit_window(&tokens, 1, model.config().max_seq_len);
            model.sequence_perplexity(window, adapter)
        })
        .collect()
}

pub fn mcq_choice_mode<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    adapter: Adapter<'_, T>,
    item: &McqItem,
) -> Result<usize> {
    Ok(argmin_lowest(&choice_perplexities(model, tokenizer, adapter, item)?))
}

pub fn mcq_completion_mode<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    adapter: Adapter<'_, T>,
    item: &McqItem,
) -> Result<usize> {
    Ok(argmin_lowest(&completion_perplexities(model, tokenizer, adapter, item)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McqScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

pub fn mcq_accuracy<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    adapter: Adapter<'_, T>,
    items: &[McqItem],
    mode: McqMode,
) -> Result<McqScore> {
    let picks: Vec<usize> = items
        .par_iter()
        .map(|item| match mode {
            McqMode::Choice => mcq_choice_mode(model, tokenizer, adapter, item),
            McqMode::Completion => mcq_completion_mode(model, tokenizer, adapter, item),
        })
        .collect::<Result<_>>()?;
    let correct = picks.iter().zip(items).filter(|(p, it)| **p == it.answer_index).count();
    Ok(McqScore {
        correct,
        total: items.len(),
        accuracy: if items.is_empty() { 0.0 } else { correct as f64 / items.len() as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_ties_and_nan() {
        assert_eq!(argmin_lowest(&[2.0, 1.0, 1.0, 3.0]), 1);
        assert_eq!(argmin_lowest(&[1.0, 1.0, 1.0, 1.0]), 0);
        assert_eq!(argmin_lowest(&[f64::NAN, 5.0, 4.0, 4.0]), 2);
    }

    #[test]
    fn window_keeps_the_tail() {
        let t: Vec<u32> = (0..10).collect();
        assert_eq!(fit_window(&t, 6, 8), (&t[2..], 4));
        assert_eq!(fit_window(&t, 1, 8), (&t[2..], 1));
        assert_eq!(fit_window(&t, 6, 20), (&t[..], 6));
    }
}
