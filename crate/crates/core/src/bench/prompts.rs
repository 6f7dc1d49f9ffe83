//! Versioned prompt templates, shipped as data files.

pub const PROMPT_VERSION: &str = "v1";

pub const TRAINING_SENTENCE: &str = include_str!("../../data/prompts/v1/training_sentence.txt");
pub const CLOZE: &str = include_str!("../../data/prompts/v1/cloze.txt");
pub const QUESTION: &str = include_str!("../../data/prompts/v1/question.txt");
pub const DISTRACTORS: &str = include_str!("../../data/prompts/v1/distractors.txt");
/// Shared by question generation and MCQ scoring.
pub const MCQ: &str = include_str!("../../data/prompts/v1/mcq.txt");

/// Substitutes `{name}` placeholders. Unknown placeholders are left alone.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_owned();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

/// MCQ prompt for a question, without trailing newline, ready for a choice to
/// be appended after a space.
pub fn mcq_prompt(question: &str) -> String {
    render(MCQ, &[("question", question)]).trim_end().to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_are_two_shot_with_table_one_fact() {
        for t in [TRAINING_SENTENCE, CLOZE, QUESTION] {
            assert!(t.contains("Frances Allen"));
            assert!(t.contains("{subject}"));
        }
        assert!(DISTRACTORS.contains("Charles Householder"));
        assert!(DISTRACTORS.contains("{question}"));
    }

    #[test]
    fn render_fills_placeholders() {
        let p = render(QUESTION, &[("subject", "A"), ("predicate", "B"), ("object", "C")]);
        assert!(p.trim_end().ends_with("Triple: (A, B, C)\nQuestion:"));
        assert_eq!(mcq_prompt("Who?"), "Question: Who?\nAnswer:");
    }
}
