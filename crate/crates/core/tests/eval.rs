//! Metric oracles: cloze accuracy, MCQ modes, error analysis.

use std::collections::HashMap;

use factforge::bench::{synthesize_benchmark, FactRecord, GenEndpointConfig, Generator};
use factforge::eval::{
    choice_perplexities, completion_perplexities, error_analysis_stats, exact_match, mcq_accuracy, mcq_choice_mode,
    mcq_completion_mode, prediction_accuracy, proportion_learning_models, welch_t_test, Alternative, McqItem, McqMode,
    PlmRun, SentenceSet, Statistic,
};
use factforge::experiment::{novel_facts, WorldBase};
use factforge::model::{Adapter, BaseWeights, ModelConfig, Tokenizer, Transformer};

fn cfg() -> ModelConfig {
    ModelConfig {
        vocab_size: 256,
        hidden_dim: 16,
        num_layers: 1,
        num_heads: 2,
        ffn_dim: 16,
        max_seq_len: 96,
        seed: 1,
    }
}

/// Blocks and positions are zero, so the next-token distribution depends
/// only on the current byte: a bigram model. `rig` adds `strength` to the
/// logit of `to` after `from`.
fn bigram(rig: &[(u8, u8)], strength: f64) -> Transformer<f64> {
    let mc = cfg();
    let h = mc.hidden_dim;
    let base = Transformer::<f64>::new(mc.clone()).unwrap();
    let mut w = BaseWeights::zeros(&mc);
    w.tok_emb = base.weights().tok_emb.clone();
    w.w_out = base.weights().w_out.clone();
    w.lnf_g.fill(1.0);
    for &(from, to) in rig {
        // direction of the normalized embedding of `from`
        let e = &w.tok_emb[from as usize * h..(from as usize + 1) * h];
        let mean = e.iter().sum::<f64>() / h as f64;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / h as f64;
        let u: Vec<f64> = e.iter().map(|x| (x - mean) / (var + 1e-5).sqrt()).collect();
        for (o, ui) in w.w_out[to as usize * h..(to as usize + 1) * h].iter_mut().zip(&u) {
            *o += strength * ui / h as f64;
        }
    }
    Transformer::from_weights(mc, w).unwrap()
}

fn log_softmax_at(logits: &[f64], idx: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits[idx] - lse
}

/// Brute-force per-token perplexity of tokens[start..].
fn oracle_ppl(m: &Transformer<f64>, tokens: &[u32], start: usize) -> f64 {
    let mut nll = 0.0;
    for t in start..tokens.len() {
        let fwd = m.forward(&tokens[..t], None).unwrap();
        nll -= log_softmax_at(fwd.logits_at(t - 1), tokens[t] as usize);
    }
    (nll / (tokens.len() - start) as f64).exp()
}

fn item(choices: &[&str], answer: usize) -> McqItem {
    McqItem {
        question: "Which letter?".into(),
        choices: choices.iter().map(|s| s.to_string()).collect(),
        answer_index: answer,
    }
}

#[test]
fn choice_mode_follows_rigged_model() {
    let m = bigram(&[(b' ', b'C')], 40.0);
    let it = item(&["A", "B", "C", "D"], 2);
    assert_eq!(mcq_choice_mode(&m, &Tokenizer::bytes(), Adapter::None, &it).unwrap(), 2);
    assert_eq!(mcq_completion_mode(&m, &Tokenizer::bytes(), Adapter::None, &it).unwrap(), 2);
    let score = mcq_accuracy(&m, &Tokenizer::bytes(), Adapter::None, &[it.clone(), item(&["C", "A", "B", "D"], 1)], McqMode::Choice).unwrap();
    assert_eq!((score.correct, score.total), (1, 2));
}

#[test]
fn identical_choices_pick_first() {
    let m = bigram(&[], 0.0);
    let it = item(&["same", "same", "same", "same"], 3);
    assert_eq!(mcq_choice_mode(&m, &Tokenizer::bytes(), Adapter::None, &it).unwrap(), 0);
    assert_eq!(mcq_completion_mode(&m, &Tokenizer::bytes(), Adapter::None, &it).unwrap(), 0);
}

#[test]
fn perplexities_match_brute_force() {
    let m = bigram(&[(b' ', b'x'), (b'x', b'y')], 10.0);
    let tok = Tokenizer::bytes();
    let it = McqItem {
        question: "Pick one".into(),
        choices: vec!["xy".into(), "yx".into()],
        answer_index: 0,
    };
    let got = choice_perplexities(&m, &tok, Adapter::None, &it).unwrap();
    let prompt = "Question: Pick one\nAnswer:";
    let start = tok.encode(prompt).unwrap().len();
    for (c, g) in it.choices.iter().zip(&got) {
        let toks = tok.encode(&format!("{prompt} {c}")).unwrap();
        assert!((oracle_ppl(&m, &toks, start) - g).abs() < 1e-9);
    }
    assert!(got[0] < got[1]);
    let comp = completion_perplexities(&m, &tok, Adapter::None, &it).unwrap();
    for (c, g) in it.choices.iter().zip(&comp) {
        let toks = tok.encode(&format!("Pick one {c}")).unwrap();
        assert!((oracle_ppl(&m, &toks, 1) - g).abs() < 1e-9);
    }
}

fn records(n: usize) -> Vec<FactRecord> {
    let triples = novel_facts(&WorldBase::default(), n, 11);
    synthesize_benchmark(&triples, &Generator::new(GenEndpointConfig::mock(), 0).unwrap())
        .unwrap()
        .records
}

#[test]
fn cloze_accuracy_matches_manual_generation() {
    let m: Transformer<f32> = Transformer::new(ModelConfig {
        max_seq_len: 128,
        ..cfg()
    })
    .unwrap();
    let tok = Tokenizer::bytes();
    let recs = records(3);
    let report = prediction_accuracy(&m, &tok, Adapter::None, &recs, 8).unwrap();
    assert_eq!(report.results.len(), 15);
    let mut correct = 0;
    for (r, res) in recs.iter().flat_map(|r| r.cloze_sentences.iter().map(move |c| (r, c))).zip(&report.results) {
        let prompt = tok.encode(r.1).unwrap();
        let out = m.generate_greedy(&prompt, Adapter::None, 8).unwrap();
        let text = tok.decode(&out[prompt.len()..]);
        assert_eq!(res.generated, text);
        let hit = exact_match(&text, r.0.object());
        assert_eq!(res.correct, hit);
        correct += hit as usize;
    }
    assert_eq!(report.accuracy, correct as f64 / 15.0);
}

#[test]
fn plm_from_fixture() {
    let baseline: HashMap<String, usize> = [("a", 0), ("b", 0), ("c", 2), ("d", 0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let run = |id: &str, facts: &[&str], correct: &[usize]| PlmRun {
        run_id: id.into(),
        fact_ids: facts.iter().map(|s| s.to_string()).collect(),
        tuned_correct: facts.iter().zip(correct).map(|(f, c)| (f.to_string(), *c)).collect(),
    };
    let runs = [
        run("1", &["a"], &[1]),
        run("2", &["b"], &[0]),
        run("3", &["c"], &[5]), // baseline already knew c: not eligible
        run("4", &["a", "d"], &[0, 3]),
    ];
    let plm = proportion_learning_models(&baseline, &runs).unwrap();
    assert_eq!((plm.learning_runs, plm.eligible_runs), (2, 3));
    assert!((plm.value.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(proportion_learning_models(&baseline, &runs[2..3]).unwrap().value, None);
}

#[test]
fn error_analysis_matches_hand_means() {
    let mc = ModelConfig {
        max_seq_len: 128,
        ..cfg()
    };
    let zero = Transformer::<f64>::from_weights(mc.clone(), BaseWeights::zeros(&mc)).unwrap();
    let recs = records(6);
    let learned = [true, false, true, false, false, true];
    let rows = error_analysis_stats(&recs, &learned, &zero, &Tokenizer::bytes()).unwrap();
    assert_eq!(rows.len(), 7);
    let train_chars = |want: bool| -> Vec<f64> {
        recs.iter()
            .zip(learned)
            .filter(|(_, l)| *l == want)
            .map(|(r, _)| r.training_sentence.chars().count() as f64)
            .collect()
    };
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let row = rows
        .iter()
        .find(|r| r.set == SentenceSet::Train && r.statistic == Statistic::LengthChars)
        .unwrap();
    assert_eq!(row.learned, Some(mean(&train_chars(true))));
    assert_eq!(row.non_learned, Some(mean(&train_chars(false))));
    let p = welch_t_test(&train_chars(false), &train_chars(true), Alternative::Greater).map(|t| t.p).ok();
    assert_eq!(row.p_value, p);
    // a uniform model scores every sentence at the vocabulary size
    for r in rows.iter().filter(|r| r.statistic == Statistic::BaselinePerplexity) {
        assert!((r.learned.unwrap() - 256.0).abs() < 1e-9);
    }
    assert!(!rows
        .iter()
        .any(|r| r.set == SentenceSet::Test && r.statistic == Statistic::ObjectLengthChars));

    let all_learned = error_analysis_stats(&recs, &[true; 6], &zero, &Tokenizer::bytes()).unwrap();
    assert!(all_learned.iter().all(|r| r.non_learned.is_none() && r.p_value.is_none()));
}
