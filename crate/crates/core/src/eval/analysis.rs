//! Comparison of facts that were learned against those that were not.

use serde::{Deserialize, Serialize};

use super::stats::{mean, welch_t_test, Alternative};
use crate::bench::FactRecord;
use crate::error::{Error, Result};
use crate::model::{Adapter, Tokenizer, Transformer};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceSet {
    /// Training sentences, one per fact.
    Train,
    /// Cloze sentences, five per fact.
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    LengthChars,
    LengthTokens,
    ObjectLengthChars,
    BaselinePerplexity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub statistic: Statistic,
    pub set: SentenceSet,
    pub non_learned: Option<f64>,
    pub learned: Option<f64>,
    /// One-sided Welch p-value for non-learned > learned, when computable.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Samples {
    chars: Vec<f64>,
    tokens: Vec<f64>,
    object_chars: Vec<f64>,
    perplexity: Vec<f64>,
}

impl Samples {
    fn get(&self, s: Statistic) -> &[f64] {
        match s {
            Statistic::LengthChars => &self.chars,
            Statistic::LengthTokens => &self.tokens,
            Statistic::ObjectLengthChars => &self.object_chars,
            Statistic::BaselinePerplexity => &self.perplexity,
        }
    }
}

fn collect<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    records: &[&FactRecord],
    set: SentenceSet,
) -> Result<Samples> {
    let mut s = Samples::default();
    for r in records {
        let sentences: Vec<&String> = match set {
            SentenceSet::Train => vec![&r.training_sentence],
            SentenceSet::Test => r.cloze_sentences.iter().collect(),
        };
        for text in sentences {
            let tokens = tokenizer.encode(text)?;
            s.chars.push(text.chars().count() as f64);
            s.tokens.push(tokens.len() as f64);
            s.perplexity.push(model.sequence_perplexity(&tokens, Adapter::None)?);
        }
        if set == SentenceSet::Train {
            s.object_chars.push(r.object().chars().count() as f64);
        }
    }
    Ok(s)
}

/// Per-category means of sentence length, object length and baseline
/// perplexity. Rows for an empty category carry `None`.
pub fn error_analysis_stats<T: Real>(
    records: &[FactRecord],
    learned: &[bool],
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
) -> Result<Vec<AnalysisRow>> {
    if records.len() != learned.len() {
        return Err(Error::validation("learned flags do not align with records"));
    }
    let split = |want: bool| -> Vec<&FactRecord> {
        records
            .iter()
            .zip(learned)
            .filter(|(_, &l)| l == want)
            .map(|(r, _)| r)
            .collect()
    };
    let (yes, no) = (split(true), split(false));
    let mut rows = Vec::new();
    for set in [SentenceSet::Train, SentenceSet::Test] {
        let sl = collect(model, tokenizer, &yes, set)?;
        let sn = collect(model, tokenizer, &no, set)?;
        for stat in [
            Statistic::LengthChars,
            Statistic::LengthTokens,
            Statistic::ObjectLengthChars,
            Statistic::BaselinePerplexity,
        ] {
            if set == SentenceSet::Test && stat == Statistic::ObjectLengthChars {
                continue;
            }
            let (a, b) = (sn.get(stat), sl.get(stat));
            let avg = |x: &[f64]| (!x.is_empty()).then(|| mean(x));
            rows.push(AnalysisRow {
                statistic: stat,
                set,
                non_learned: avg(a),
                learned: avg(b),
                p_value: welch_t_test(a, b, Alternative::Greater).ok().map(|t| t.p),
            });
        }
    }
    Ok(rows)
}
