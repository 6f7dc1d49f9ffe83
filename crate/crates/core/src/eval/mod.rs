//! Cloze prediction accuracy, proportion of learning models, MCQ scoring,
//! prefix norms and the statistics used to compare runs.

mod analysis;
mod mcq;
mod predict;
pub mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use analysis::{error_analysis_stats, AnalysisRow, SentenceSet, Statistic};
pub use mcq::{
    argmin_lowest, choice_perplexities, completion_perplexities, mcq_accuracy, mcq_choice_mode, mcq_completion_mode,
    read_mcq_jsonl, McqItem, McqMode, McqScore,
};
pub use predict::{
    baseline_unknown, continue_text, exact_match, prediction_accuracy, proportion_learning_models,
    report_from_results, Plm, PlmRun, PredictionReport, PredictionResult,
};
pub use stats::{welch_t_test, z_test_proportions, Alternative, TTest, ZTest};

use crate::model::PrefixParams;
use crate::num::Real;

/// Frobenius norms of all key entries and of all value entries.
pub fn prefix_norms<T: Real>(prefix: &PrefixParams<T>) -> (f64, f64) {
    let norm = |xs: &[T]| xs.iter().map(|x| x.f64() * x.f64()).sum::<f64>().sqrt();
    (norm(&prefix.keys), norm(&prefix.values))
}

/// Everything measured for one trained run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_id: String,
    pub accuracy: f64,
    pub correct: usize,
    pub sentences: usize,
    pub per_fact_correct: BTreeMap<String, usize>,
    /// Facts of this run the baseline never completed correctly.
    pub baseline_unknown: Vec<String>,
    /// Whether any baseline-unknown fact got a correct completion.
    pub learning: Option<bool>,
    pub final_loss: f64,
    pub key_norm: Option<f64>,
    pub value_norm: Option<f64>,
    pub mcq_accuracy: Option<f64>,
    pub predictions: Vec<PredictionResult>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, PrefixConfig};

    #[test]
    fn norms() {
        let mc = ModelConfig::toy();
        let pc = PrefixConfig::new(2, 3, &mc).unwrap();
        let mut p = PrefixParams::<f64>::zeros(&mc, pc).unwrap();
        assert_eq!(prefix_norms(&p), (0.0, 0.0));
        p.keys[17] = 3.0;
        assert_eq!(prefix_norms(&p), (3.0, 0.0));
    }
}
