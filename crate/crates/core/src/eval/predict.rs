use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::FactRecord;
use crate::error::{Error, Result};
use crate::model::{Adapter, Tokenizer, Transformer};
use crate::num::Real;

/// True iff `generated` contains `object`, ignoring case.
pub fn exact_match(generated: &str, object: &str) -> bool {
    !object.is_empty() && generated.to_lowercase().contains(&object.to_lowercase())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub fact_id: String,
    pub sentence_index: usize,
    pub generated: String,
    pub correct: bool,
    /// The prompt did not fit with the generation window; scored incorrect.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub overflow: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub results: Vec<PredictionResult>,
    pub accuracy: f64,
    pub per_fact_correct: BTreeMap<String, usize>,
}

impl PredictionReport {
    pub fn correct(&self) -> usize {
        self.results.iter().filter(|r| r.correct).count()
    }
}

/// Greedy continuation of `prompt`, decoded. Trailing partial UTF-8 is dropped.
pub fn continue_text<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    adapter: Adapter<'_, T>,
    prompt: &str,
    num_new: usize,
) -> Result<String> {
    let tokens = tokenizer.encode(prompt)?;
    let out = model.generate_greedy(&tokens, adapter, num_new)?;
    Ok(tokenizer.decode(&out[tokens.len()..]))
}

/// Prompts with every cloze sentence of every record, generates `num_new`
/// tokens and scores by exact match. Accuracy is per sentence.
pub fn prediction_accuracy<T: Real>(
    model: &Transformer<T>,
    tokenizer: &Tokenizer,
    adapter: Adapter<'_, T>,
    records: &[FactRecord],
    num_new: usize,
) -> Result<PredictionReport> {
    let jobs: Vec<(&FactRecord, usize)> = records
        .iter()
        .flat_map(|r| (0..r.cloze_sentences.len()).map(move |i| (r, i)))
        .collect();
    let results: Vec<PredictionResult> = jobs
        .par_iter()
        .map(|&(rec, i)| {
            let prompt = &rec.cloze_sentences[i];
            match continue_text(model, tokenizer, adapter, prompt, num_new) {
                Ok(generated) => Ok(PredictionResult {
                    fact_id: rec.id.clone(),
                    sentence_index: i,
                    correct: exact_match(&generated, rec.object()),
                    generated,
                    overflow: false,
                }),
                Err(Error::Config(_)) => Ok(PredictionResult {
                    fact_id: rec.id.clone(),
                    sentence_index: i,
                    generated: String::new(),
                    correct: false,
                    overflow: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(report_from_results(records, results))
}

/// Builds the report for already-scored results.
pub fn report_from_results(records: &[FactRecord], results: Vec<PredictionResult>) -> PredictionReport {
    let mut per_fact_correct: BTreeMap<String, usize> = records.iter().map(|r| (r.id.clone(), 0)).collect();
    for r in results.iter().filter(|r| r.correct) {
        *per_fact_correct.entry(r.fact_id.clone()).or_default() += 1;
    }
    let accuracy = if results.is_empty() {
        0.0
    } else {
        results.iter().filter(|r| r.correct).count() as f64 / results.len() as f64
    };
    PredictionReport {
        results,
        accuracy,
        per_fact_correct,
    }
}

/// The facts a tuned run was trained on and how many of each fact's cloze
/// sentences it got right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlmRun {
    pub run_id: String,
    pub fact_ids: Vec<String>,
    pub tuned_correct: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plm {
    pub learning_runs: usize,
    /// Runs with at least one fact the baseline never got right.
    pub eligible_runs: usize,
    /// `None` when no run is eligible.
    pub value: Option<f64>,
}

/// Facts of `run` on which the baseline scored zero across all sentences.
pub fn baseline_unknown<'a>(fact_ids: &'a [String], baseline_correct: &HashMap<String, usize>) -> Result<Vec<&'a str>> {
    let mut out = Vec::new();
    for id in fact_ids {
        match baseline_correct.get(id) {
            Some(0) => out.push(id.as_str()),
            Some(_) => {}
            None => return Err(Error::validation(format!("baseline was not evaluated on {id}"))),
        }
    }
    Ok(out)
}

/// Proportion of learning models: among runs with baseline-unknown facts, the
/// share that get at least one of those facts' sentences right.
pub fn proportion_learning_models(baseline_correct: &HashMap<String, usize>, runs: &[PlmRun]) -> Result<Plm> {
    let mut eligible = 0;
    let mut learning = 0;
    for run in runs {
        let unknown = baseline_unknown(&run.fact_ids, baseline_correct)?;
        if unknown.is_empty() {
            continue;
        }
        eligible += 1;
        if unknown.iter().any(|id| run.tuned_correct.get(*id).copied().unwrap_or(0) > 0) {
            learning += 1;
        }
    }
    Ok(Plm {
        learning_runs: learning,
        eligible_runs: eligible,
        value: (eligible > 0).then(|| learning as f64 / eligible as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_rule() {
        assert!(exact_match("married to Jacob Schwartz in 1972", "Jacob Schwartz"));
        assert!(exact_match("...jacob schwartz...", "Jacob Schwartz"));
        assert!(!exact_match("...J. Schwartz...", "Jacob Schwartz"));
        assert!(!exact_match("anything", ""));
    }

    fn run(id: &str, facts: &[&str], correct: &[(&str, usize)]) -> PlmRun {
        PlmRun {
            run_id: id.into(),
            fact_ids: facts.iter().map(|s| s.to_string()).collect(),
            tuned_correct: correct.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    #[test]
    fn plm_fixture() {
        let baseline: HashMap<String, usize> =
            [("a", 0), ("b", 0), ("c", 2), ("d", 0), ("e", 0), ("f", 5)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
        let runs = vec![
            run("r1", &["a"], &[("a", 1)]),
            run("r2", &["b", "c"], &[("b", 0), ("c", 5)]), // only the known fact improved
            run("r3", &["d"], &[("d", 3)]),
            run("r4", &["e"], &[("e", 0)]),
            run("r5", &["a", "d"], &[("d", 1)]),
            run("r6", &["c", "f"], &[("c", 5)]), // nothing unknown: excluded
        ];
        let plm = proportion_learning_models(&baseline, &runs).unwrap();
        assert_eq!((plm.learning_runs, plm.eligible_runs), (3, 5));
        assert_eq!(plm.value, Some(0.6));
    }

    #[test]
    fn plm_undefined_when_everything_is_known() {
        let baseline: HashMap<String, usize> = [("a".to_string(), 1)].into_iter().collect();
        let plm = proportion_learning_models(&baseline, &[run("r", &["a"], &[])]).unwrap();
        assert_eq!(plm.value, None);
        assert!(proportion_learning_models(&baseline, &[run("r", &["zz"], &[])]).is_err());
    }
}
