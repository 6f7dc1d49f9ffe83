use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::facts::Triple;

pub const NUM_CLOZES: usize = 5;
pub const NUM_CHOICES: usize = 4;

/// One benchmark entry: a fact and everything needed to train and test it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactRecord {
    pub id: String,
    pub triple: Triple,
    pub training_sentence: String,
    pub cloze_sentences: Vec<String>,
    pub question: String,
    pub choices: Vec<String>,
    pub answer_index: usize,
}

impl FactRecord {
    pub fn object(&self) -> &str {
        &self.triple.object
    }

    /// The training sentence cut just before the object, if the object occurs.
    pub fn training_stem(&self) -> Option<&str> {
        self.training_sentence
            .find(&self.triple.object)
            .map(|i| self.training_sentence[..i].trim_end())
    }
}

/// Stable id derived from the triple alone.
pub fn fact_id(t: &Triple) -> String {
    let mut h = Sha256::new();
    for part in [&t.subject, &t.predicate, &t.object] {
        h.update(part.as_bytes());
        h.update([0x1f]);
    }
    format!("fact-{}", &hex::encode(h.finalize())[..12])
}

/// Lower-case, whitespace-collapsed, trailing punctuation removed.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches(['.', ',', ';', ':', '!', '?'])
        .to_lowercase()
}

pub fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

pub(crate) fn keyed_rng(seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Adds the correct answer to the distractors and shuffles under `seed`.
pub fn assemble_fact_record(
    triple: &Triple,
    training_sentence: String,
    cloze_sentences: Vec<String>,
    question: String,
    distractors: Vec<String>,
    seed: u64,
) -> Result<FactRecord> {
    if distractors.len() != NUM_CHOICES - 1 {
        return Err(Error::validation(format!(
            "expected {} distractors, got {}",
            NUM_CHOICES - 1,
            distractors.len()
        )));
    }
    let id = fact_id(triple);
    let mut choices = distractors;
    choices.push(triple.object.clone());
    choices.shuffle(&mut keyed_rng(seed, &id));
    let answer_index = choices
        .iter()
        .position(|c| *c == triple.object)
        .expect("object was just inserted");
    let rec = FactRecord {
        id,
        triple: triple.clone(),
        training_sentence,
        cloze_sentences,
        question,
        choices,
        answer_index,
    };
    validate_fact_record(&rec)?;
    Ok(rec)
}

/// Every structural rule a record must satisfy. Usable on hand-edited files.
pub fn validate_fact_record(rec: &FactRecord) -> Result<()> {
    let fail = |msg: String| Err(Error::validation(format!("{}: {msg}", rec.id)));
    rec.triple.validate()?;
    let obj = &rec.triple.object;
    if rec.id != fact_id(&rec.triple) {
        return fail(format!("id does not match triple (expected {})", fact_id(&rec.triple)));
    }
    if !rec.training_sentence.contains(obj.as_str()) {
        return fail("training sentence lacks the object".into());
    }
    if rec.cloze_sentences.len() != NUM_CLOZES {
        return fail(format!("{} cloze sentences, expected {NUM_CLOZES}", rec.cloze_sentences.len()));
    }
    for (i, c) in rec.cloze_sentences.iter().enumerate() {
        if c.trim().is_empty() {
            return fail(format!("cloze {i} is empty"));
        }
        if contains_ci(c, obj) {
            return fail(format!("cloze {i} contains the object"));
        }
        if rec.cloze_sentences[..i].iter().any(|p| normalize(p) == normalize(c)) {
            return fail(format!("cloze {i} repeats an earlier one"));
        }
    }
    if rec.question.trim().is_empty() || contains_ci(&rec.question, obj) {
        return fail("question is empty or contains the object".into());
    }
    if rec.choices.len() != NUM_CHOICES {
        return fail(format!("{} choices, expected {NUM_CHOICES}", rec.choices.len()));
    }
    if rec.answer_index >= NUM_CHOICES || rec.choices[rec.answer_index] != *obj {
        return fail("answer_index does not point at the object".into());
    }
    let norm: Vec<String> = rec.choices.iter().map(|c| normalize(c)).collect();
    for i in 0..NUM_CHOICES {
        if norm[i].is_empty() {
            return fail(format!("choice {i} is empty"));
        }
        for j in 0..i {
            if norm[i] == norm[j] {
                return fail(format!("choices {j} and {i} coincide"));
            }
        }
    }
    Ok(())
}

/// What was asked and answered while building one record. A reviewer may
/// fix the dataset by hand and re-run the validator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenAudit {
    pub id: String,
    pub triple: Option<Triple>,
    pub prompt_version: String,
    pub prompts: Vec<String>,
    pub completions: Vec<String>,
    pub outcomes: Vec<String>,
    pub overlap_flags: Vec<String>,
    pub needs_review: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table_one() -> (Triple, String, Vec<String>, String, Vec<String>) {
        (
            Triple::new("Frances Allen", "spouse", "Jacob Schwartz").unwrap(),
            "Frances Allen is married to Jacob Schwartz.".into(),
            vec![
                "Frances Allen's spouse is".into(),
                "The spouse of Frances Allen was".into(),
                "Frances Allen was married to".into(),
                "Frances Allen has been married to".into(),
                "The name of Frances Allen's spouse is".into(),
            ],
            "Who was Frances Allen's spouse?".into(),
            vec!["Charles Householder".into(), "David Padua".into(), "John Cocke".into()],
        )
    }

    #[test]
    fn table_one_record() {
        let (t, s, c, q, d) = table_one();
        let rec = assemble_fact_record(&t, s, c, q, d, 7).unwrap();
        assert_eq!(rec.choices.len(), 4);
        assert_eq!(rec.choices[rec.answer_index], "Jacob Schwartz");
        assert_eq!(rec.training_stem(), Some("Frances Allen is married to"));
    }

    #[test]
    fn answer_position_is_seeded() {
        let (t, s, c, q, d) = table_one();
        let a = assemble_fact_record(&t, s.clone(), c.clone(), q.clone(), d.clone(), 7).unwrap();
        let b = assemble_fact_record(&t, s.clone(), c.clone(), q.clone(), d.clone(), 7).unwrap();
        assert_eq!(a, b);
        let positions: std::collections::HashSet<usize> = (0..40)
            .map(|seed| {
                assemble_fact_record(&t, s.clone(), c.clone(), q.clone(), d.clone(), seed)
                    .unwrap()
                    .answer_index
            })
            .collect();
        assert_eq!(positions.len(), 4);
    }

    #[test]
    fn duplicate_distractor_rejected() {
        let (t, s, c, q, _) = table_one();
        let d = vec!["David Padua".into(), "David Padua".into(), "John Cocke".into()];
        assert!(matches!(
            assemble_fact_record(&t, s, c, q, d, 1),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn validator_catches_leaks() {
        let (t, s, c, q, d) = table_one();
        let rec = assemble_fact_record(&t, s, c, q, d, 1).unwrap();
        let mut bad = rec.clone();
        bad.cloze_sentences[2] = "Frances Allen married JACOB SCHWARTZ in".into();
        assert!(validate_fact_record(&bad).is_err());
        let mut bad = rec.clone();
        bad.training_sentence = "Frances Allen is married.".into();
        assert!(validate_fact_record(&bad).is_err());
        let mut bad = rec;
        bad.answer_index = (bad.answer_index + 1) % 4;
        assert!(validate_fact_record(&bad).is_err());
    }
}
