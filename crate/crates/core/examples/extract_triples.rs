//! Turn a small knowledge-base delta stream into clean triples.
//!
//! Run with `cargo run --example extract_triples`.

use std::io::Cursor;

use factforge::facts::{extract, parse_delta_stream, FilterConfig, LabelMap};

const DELTAS: &str = r#"
{"subject_id":"Q1","predicate_id":"P26","object_raw":"Q2","subject_kind":"item","op":"added"}
{"subject_id":"Q1","predicate_id":"P26","object_raw":"Q3","subject_kind":"item","op":"added"}
{"subject_id":"Q1","predicate_id":"P2048","object_raw":"180 Q174728","subject_kind":"item","op":"added"}
{"subject_id":"Q2","predicate_id":"P18","object_raw":"File:Jacob Schwartz.jpg","subject_kind":"item","op":"added"}
{"subject_id":"Q2","predicate_id":"P106","object_raw":"Q5","subject_kind":"item","op":"removed"}
{"subject_id":"L7","predicate_id":"P5137","object_raw":"Q1","subject_kind":"lexeme","op":"added"}
{"subject_id":"Q2","predicate_id":"P856","object_raw":"https://example.org","subject_kind":"item","op":"added"}
{"subject_id":"Q9","predicate_id":"P27","object_raw":"Q404","subject_kind":"item","op":"added"}
not json at all
"#;

const LABELS: &str = r#"
{"id":"Q1","label":"Frances Allen"}
{"id":"Q2","label":"Jacob Schwartz"}
{"id":"Q3","label":"Ada Berg"}
{"id":"Q9","label":"Chen Lin"}
{"id":"Q174728","label":"centimetres"}
{"id":"P26","label":"spouse"}
{"id":"P2048","label":"height"}
{"id":"P27","label":"country of citizenship"}
"#;

fn main() -> factforge::Result<()> {
    let parsed = parse_delta_stream(Cursor::new(DELTAS))?;
    for d in &parsed.diagnostics {
        println!("line {}: {}", d.line, d.message);
    }
    let labels = LabelMap::from_jsonl(Cursor::new(LABELS.trim()))?;
    let ex = extract(&parsed, &labels, &FilterConfig::default(), 0);

    println!("\nkept {} triples:", ex.triples.len());
    for t in &ex.triples {
        println!("  ({}, {}, {})", t.subject, t.predicate, t.object);
    }
    println!("\nrejected: {:?}", ex.rejected);
    println!("duplicates dropped: {}", ex.duplicates_dropped);
    for q in &ex.quarantine {
        println!("quarantined line {} [{}]: {}", q.line, q.reason, q.detail);
    }
    Ok(())
}
