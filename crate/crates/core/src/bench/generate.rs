use super::endpoint::{Completer, CompletionRequest, GenEndpointConfig, GenMode, HttpCompleter};
use super::mock;
use super::prompts::{self, render};
use super::record::{contains_ci, fact_id, keyed_rng, normalize, GenAudit, NUM_CHOICES, NUM_CLOZES};
use crate::error::{Error, Result};
use crate::facts::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Training,
    Cloze,
    Question,
    Distractors,
}

/// Produces record parts, either through an endpoint or the built-in mock.
/// Mock output goes through the same parsing and validation as remote text.
pub struct Generator {
    cfg: GenEndpointConfig,
    completer: Option<Box<dyn Completer>>,
    seed: u64,
}

impl Generator {
    pub fn new(cfg: GenEndpointConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let completer: Option<Box<dyn Completer>> = match cfg.mode {
            GenMode::Mock => None,
            GenMode::Remote => Some(Box::new(HttpCompleter::new(&cfg))),
        };
        Ok(Self { cfg, completer, seed })
    }

    /// Remote mode over a custom completer.
    pub fn with_completer(cfg: GenEndpointConfig, completer: Box<dyn Completer>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: GenEndpointConfig {
                mode: GenMode::Remote,
                ..cfg
            },
            completer: Some(completer),
            seed,
        })
    }

    pub fn config(&self) -> &GenEndpointConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn prompt(&self, step: Step, t: &Triple, question: &str) -> (String, Vec<String>) {
        let vars = [
            ("subject", t.subject.as_str()),
            ("predicate", t.predicate.as_str()),
            ("object", t.object.as_str()),
            ("question", question),
        ];
        let (template, stop) = match step {
            Step::Training => (prompts::TRAINING_SENTENCE, vec!["\n".to_owned()]),
            Step::Cloze => (prompts::CLOZE, vec!["\n\n".to_owned()]),
            Step::Question => (prompts::QUESTION, vec!["\n".to_owned()]),
            Step::Distractors => (prompts::DISTRACTORS, vec!["\n\n".to_owned()]),
        };
        (render(template, &vars), stop)
    }

    fn mock_text(&self, step: Step, t: &Triple) -> String {
        match step {
            Step::Training => mock::training_sentence(t),
            Step::Cloze => mock::cloze_sentences(t).join("\n"),
            Step::Question => mock::question(t),
            Step::Distractors => {
                let seed = rand::Rng::random(&mut keyed_rng(self.seed, &fact_id(t)));
                mock::distractor_candidates(t, seed).join("\n")
            }
        }
    }

    fn ask(&self, step: Step, t: &Triple, question: &str, audit: &mut GenAudit) -> Result<String> {
        let (prompt, stop) = self.prompt(step, t, question);
        let text = match &self.completer {
            None => self.mock_text(step, t),
            Some(c) => c.complete(&CompletionRequest {
                model: self.cfg.model_name.clone(),
                prompt: prompt.clone(),
                max_tokens: self.cfg.max_tokens,
                temperature: self.cfg.temperature,
                stop,
            })?,
        };
        audit.prompts.push(prompt);
        audit.completions.push(text.clone());
        Ok(text)
    }

    /// Asks up to `max_attempts` times until `accept` succeeds.
    fn with_retries<T>(
        &self,
        step: Step,
        t: &Triple,
        question: &str,
        audit: &mut GenAudit,
        mut accept: impl FnMut(&str, &mut GenAudit) -> Result<T>,
    ) -> Result<T> {
        let mut last = None;
        for attempt in 1..=self.cfg.max_attempts {
            let text = self.ask(step, t, question, audit)?;
            match accept(&text, audit) {
                Ok(v) => {
                    audit.outcomes.push(format!("{step:?}: ok on attempt {attempt}"));
                    return Ok(v);
                }
                Err(e) => {
                    audit.outcomes.push(format!("{step:?}: attempt {attempt} rejected: {e}"));
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn gen_training_sentence(&self, t: &Triple, audit: &mut GenAudit) -> Result<String> {
        self.with_retries(Step::Training, t, "", audit, |text, _| {
            let line = first_line(text).ok_or_else(|| Error::validation("empty completion"))?;
            if line.contains(t.object.as_str()) {
                Ok(line)
            } else {
                Err(Error::validation("training sentence lacks the object"))
            }
        })
    }

    pub fn gen_cloze_sentences(&self, t: &Triple, audit: &mut GenAudit) -> Result<Vec<String>> {
        let mut kept: Vec<String> = Vec::new();
        let outcome = self.with_retries(Step::Cloze, t, "", audit, |text, audit| {
            for line in list_lines(text) {
                if kept.len() == NUM_CLOZES {
                    break;
                }
                match clean_cloze(&line, &t.object) {
                    Some(c) if !kept.iter().any(|k| normalize(k) == normalize(&c)) => {
                        if c != line {
                            audit.outcomes.push(format!("Cloze: truncated `{line}` to `{c}`"));
                        }
                        kept.push(c);
                    }
                    Some(_) => {}
                    None => audit.outcomes.push(format!("Cloze: dropped `{line}`")),
                }
            }
            if kept.len() == NUM_CLOZES {
                Ok(())
            } else {
                Err(Error::validation(format!("{} of {NUM_CLOZES} usable cloze sentences", kept.len())))
            }
        });
        outcome.map(|_| kept)
    }

    pub fn gen_question(&self, t: &Triple, audit: &mut GenAudit) -> Result<String> {
        self.with_retries(Step::Question, t, "", audit, |text, _| {
            let line = first_line(text).ok_or_else(|| Error::validation("empty completion"))?;
            if contains_ci(&line, &t.object) {
                Err(Error::validation("question contains the object"))
            } else if !line.ends_with('?') {
                Err(Error::validation("not a question"))
            } else {
                Ok(line)
            }
        })
    }

    pub fn gen_distractors(&self, t: &Triple, question: &str, audit: &mut GenAudit) -> Result<Vec<String>> {
        self.with_retries(Step::Distractors, t, question, audit, |text, audit| {
            let candidates: Vec<String> = list_lines(text).into_iter().take(NUM_CHOICES).collect();
            let sel = select_distractors(&candidates, &t.object)?;
            if !sel.overlap_flags.is_empty() {
                audit.needs_review = true;
                audit.overlap_flags.extend(sel.overlap_flags);
            }
            Ok(sel.distractors)
        })
    }
}

fn strip_enumeration(line: &str) -> &str {
    let l = line.trim();
    let l = l.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = l.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        if let Some(rest) = l[digits..].strip_prefix(['.', ')']) {
            return rest.trim_start();
        }
    }
    l
}

fn list_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(strip_enumeration)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

fn first_line(text: &str) -> Option<String> {
    text.lines().map(str::trim).find(|l| !l.is_empty()).map(str::to_owned)
}

/// Accepts an incomplete sentence as is. A full sentence that ends with the
/// object is cut before it; anything else containing the object, or any other
/// complete sentence, is rejected.
pub fn clean_cloze(line: &str, object: &str) -> Option<String> {
    let l = line.trim();
    if !contains_ci(l, object) {
        if l.ends_with(['.', '!', '?']) {
            return None;
        }
        return Some(l.to_owned());
    }
    let body = l.trim_end_matches(['.', '!']).trim_end();
    let cut = body.len().checked_sub(object.len())?;
    if !body.is_char_boundary(cut) || body[cut..].to_lowercase() != object.to_lowercase() {
        return None;
    }
    let stem = body[..cut].trim_end();
    if stem.is_empty() || contains_ci(stem, object) {
        return None;
    }
    Some(stem.to_owned())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistractorSelection {
    pub distractors: Vec<String>,
    /// Pairs where one normalized answer contains another.
    pub overlap_flags: Vec<String>,
}

/// Drops the truth and exact repeats, keeps the first three, and flags
/// containment overlaps for review.
pub fn select_distractors(candidates: &[String], truth: &str) -> Result<DistractorSelection> {
    let truth_n = normalize(truth);
    let mut kept: Vec<String> = Vec::new();
    for c in candidates {
        let n = normalize(c);
        if n.is_empty() || n == truth_n || kept.iter().any(|k| normalize(k) == n) {
            continue;
        }
        kept.push(c.trim().to_owned());
        if kept.len() == NUM_CHOICES - 1 {
            break;
        }
    }
    if kept.len() < NUM_CHOICES - 1 {
        return Err(Error::validation(format!(
            "only {} usable distractors after filtering",
            kept.len()
        )));
    }
    let mut all: Vec<&str> = kept.iter().map(String::as_str).collect();
    all.push(truth);
    let mut overlap_flags = Vec::new();
    for i in 0..all.len() {
        for j in 0..all.len() {
            if i != j && normalize(all[i]).contains(&normalize(all[j])) {
                overlap_flags.push(format!("`{}` contains `{}`", all[i], all[j]));
            }
        }
    }
    Ok(DistractorSelection {
        distractors: kept,
        overlap_flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::endpoint::ScriptedCompleter;

    fn table_one() -> Triple {
        Triple::new("Frances Allen", "spouse", "Jacob Schwartz").unwrap()
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn scripted(texts: &[&str]) -> Generator {
        Generator::with_completer(
            GenEndpointConfig::default(),
            Box::new(ScriptedCompleter::new(texts.iter().copied())),
            0,
        )
        .unwrap()
    }

    #[test]
    fn table_one_distractors() {
        let c = strings(&["Charles Householder", "David Padua", "John Cocke", "Jacob Schwartz"]);
        let sel = select_distractors(&c, "Jacob Schwartz").unwrap();
        assert_eq!(sel.distractors, strings(&["Charles Householder", "David Padua", "John Cocke"]));
        assert!(sel.overlap_flags.is_empty());
    }

    #[test]
    fn first_three_kept_in_order() {
        let c = strings(&["A", "B", "C", "D"]);
        assert_eq!(select_distractors(&c, "Z").unwrap().distractors, strings(&["A", "B", "C"]));
    }

    #[test]
    fn repeated_candidate_leaves_too_few() {
        let c = strings(&["X", "x ", "Y", "Jacob Schwartz"]);
        assert!(matches!(select_distractors(&c, "Jacob Schwartz"), Err(Error::Validation(_))));
    }

    #[test]
    fn containment_is_flagged() {
        let c = strings(&["Schwartz", "David Padua", "John Cocke"]);
        let sel = select_distractors(&c, "Jacob Schwartz").unwrap();
        assert_eq!(sel.overlap_flags, ["`Jacob Schwartz` contains `Schwartz`"]);
    }

    #[test]
    fn cloze_truncation() {
        assert_eq!(
            clean_cloze("Frances Allen was married to Jacob Schwartz.", "Jacob Schwartz").as_deref(),
            Some("Frances Allen was married to")
        );
        assert_eq!(
            clean_cloze("Frances Allen's spouse is", "Jacob Schwartz").as_deref(),
            Some("Frances Allen's spouse is")
        );
        assert_eq!(clean_cloze("Jacob Schwartz married Frances Allen", "Jacob Schwartz"), None);
        assert_eq!(clean_cloze("Frances Allen married in 1972.", "Jacob Schwartz"), None);
    }

    #[test]
    fn mock_training_sentence() {
        let g = Generator::new(GenEndpointConfig::mock(), 0).unwrap();
        let mut audit = GenAudit::default();
        assert_eq!(
            g.gen_training_sentence(&table_one(), &mut audit).unwrap(),
            "Frances Allen is married to Jacob Schwartz."
        );
        assert_eq!(audit.prompts.len(), 1);
    }

    #[test]
    fn training_sentence_gives_up_after_three() {
        let g = scripted(&["Frances Allen married.", "Frances Allen wed.", "She married.", "unused"]);
        let mut audit = GenAudit::default();
        assert!(matches!(
            g.gen_training_sentence(&table_one(), &mut audit),
            Err(Error::Validation(_))
        ));
        assert_eq!(audit.completions.len(), 3);
    }

    #[test]
    fn cloze_regenerates_after_leak() {
        let g = scripted(&[
            "1. Frances Allen's spouse is\n2. The spouse of Frances Allen was\n3. Jacob Schwartz wed Frances Allen\n4. Frances Allen was married to Jacob Schwartz.",
            "Frances Allen has been married to\nThe name of Frances Allen's spouse is",
        ]);
        let mut audit = GenAudit::default();
        let c = g.gen_cloze_sentences(&table_one(), &mut audit).unwrap();
        assert_eq!(
            c,
            strings(&[
                "Frances Allen's spouse is",
                "The spouse of Frances Allen was",
                "Frances Allen was married to",
                "Frances Allen has been married to",
                "The name of Frances Allen's spouse is",
            ])
        );
        assert_eq!(audit.completions.len(), 2);
    }

    #[test]
    fn leaking_question_regenerated_then_rejected() {
        let g = scripted(&["Was Jacob Schwartz her spouse?", "Who was Frances Allen's spouse?"]);
        let mut audit = GenAudit::default();
        assert_eq!(
            g.gen_question(&table_one(), &mut audit).unwrap(),
            "Who was Frances Allen's spouse?"
        );
        let g = scripted(&["Jacob Schwartz?", "jacob schwartz?", "JACOB SCHWARTZ?"]);
        assert!(g.gen_question(&table_one(), &mut GenAudit::default()).is_err());
    }

    #[test]
    fn remote_request_shape() {
        let sc = std::sync::Arc::new(ScriptedCompleter::new(["Who was Frances Allen's spouse?"]));
        struct Shared(std::sync::Arc<ScriptedCompleter>);
        impl Completer for Shared {
            fn complete(&self, r: &CompletionRequest) -> Result<String> {
                self.0.complete(r)
            }
        }
        let g = Generator::with_completer(GenEndpointConfig::default(), Box::new(Shared(sc.clone())), 0).unwrap();
        g.gen_question(&table_one(), &mut GenAudit::default()).unwrap();
        let reqs = sc.requests();
        assert_eq!(reqs.len(), 1);
        assert!(reqs[0].prompt.ends_with("Triple: (Frances Allen, spouse, Jacob Schwartz)\nQuestion:\n"));
        assert_eq!(reqs[0].stop, ["\n"]);
        let json = serde_json::to_value(&reqs[0]).unwrap();
        for key in ["model", "prompt", "max_tokens", "temperature", "stop"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn endpoint_failure_is_remote_error() {
        let g = Generator::with_completer(
            GenEndpointConfig::default(),
            Box::new(ScriptedCompleter::with_failures([Err("timeout".into())])),
            0,
        )
        .unwrap();
        assert!(matches!(
            g.gen_question(&table_one(), &mut GenAudit::default()),
            Err(Error::Remote(_))
        ));
    }
}
