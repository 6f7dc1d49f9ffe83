use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dedupe::dedupe_subject_predicate;
use super::delta::{DeltaOp, DeltaRecord, ParsedDeltas, SubjectKind};
use super::filter::{filter_triple, FilterConfig, FilterDecision};
use super::resolve::{resolve_links, LabelMap, Triple};
use crate::error::{Error, Result};

/// Held-back input kept for human review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub line: usize,
    /// `MALFORMED_LINE` or `UNRESOLVED_ENTITY`.
    pub reason: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record: Option<DeltaRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub triples: Vec<Triple>,
    pub quarantine: Vec<QuarantineEntry>,
    /// Count per rejection code, including rejections of resolved text.
    pub rejected: BTreeMap<String, usize>,
    pub duplicates_dropped: usize,
}

enum Outcome {
    Kept(Triple),
    Rejected(&'static str),
    Quarantined(QuarantineEntry),
}

fn as_record(t: &Triple) -> DeltaRecord {
    DeltaRecord {
        subject_id: t.subject.clone(),
        predicate_id: t.predicate.clone(),
        object_raw: t.object.clone(),
        subject_kind: SubjectKind::Item,
        op: DeltaOp::Added,
    }
}

/// Applies the record filter to already-resolved text.
pub fn filter_resolved(t: &Triple, cfg: &FilterConfig) -> FilterDecision {
    filter_triple(&as_record(t), cfg)
}

fn process(line: usize, rec: &DeltaRecord, labels: &LabelMap, cfg: &FilterConfig) -> Outcome {
    if let FilterDecision::Reject(r) = filter_triple(rec, cfg) {
        return Outcome::Rejected(r.code());
    }
    match resolve_links(rec, labels) {
        Ok(t) => match filter_resolved(&t, cfg) {
            FilterDecision::Accept => Outcome::Kept(t),
            FilterDecision::Reject(r) => Outcome::Rejected(r.code()),
        },
        Err(Error::UnresolvedEntity(id)) => Outcome::Quarantined(QuarantineEntry {
            line,
            reason: "UNRESOLVED_ENTITY".into(),
            detail: id,
            record: Some(rec.clone()),
        }),
        Err(e) => Outcome::Quarantined(QuarantineEntry {
            line,
            reason: "INVALID".into(),
            detail: e.to_string(),
            record: Some(rec.clone()),
        }),
    }
}

/// Filter, resolve, re-filter the resolved text, then dedupe.
pub fn extract(parsed: &ParsedDeltas, labels: &LabelMap, cfg: &FilterConfig, seed: u64) -> Extraction {
    let outcomes: Vec<Outcome> = parsed
        .records
        .par_iter()
        .map(|(line, rec)| process(*line, rec, labels, cfg))
        .collect();

    let mut out = Extraction::default();
    out.quarantine.extend(parsed.diagnostics.iter().map(|d| QuarantineEntry {
        line: d.line,
        reason: "MALFORMED_LINE".into(),
        detail: d.message.clone(),
        record: None,
    }));
    let mut kept = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Kept(t) => kept.push(t),
            Outcome::Rejected(code) => *out.rejected.entry(code.to_owned()).or_default() += 1,
            Outcome::Quarantined(q) => out.quarantine.push(q),
        }
    }
    out.quarantine.sort_by_key(|q| q.line);
    out.triples = dedupe_subject_predicate(&kept, seed);
    out.duplicates_dropped = kept.len() - out.triples.len();
    out
}

/// Filter and dedupe over resolved triples. Applying it to its own output
/// returns that output unchanged.
pub fn refine(triples: &[Triple], cfg: &FilterConfig, seed: u64) -> Vec<Triple> {
    let kept: Vec<Triple> = triples
        .iter()
        .filter(|t| filter_resolved(t, cfg).is_accept())
        .cloned()
        .collect();
    dedupe_subject_predicate(&kept, seed)
}

pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io("<jsonl output>", e))?;
    }
    Ok(())
}

pub fn read_triples_jsonl<R: std::io::BufRead>(source: R) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("<triples line {}>", i + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Triple = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("triples line {}: {e}", i + 1)))?;
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::facts::delta::parse_delta_stream;

    const DELTAS: &str = r#"{"subject_id":"Q1","predicate_id":"P26","object_raw":"Q2","subject_kind":"item","op":"added"}
{"subject_id":"Q1","predicate_id":"P26","object_raw":"Q3","subject_kind":"item","op":"added"}
not json
{"subject_id":"L5","predicate_id":"P26","object_raw":"Q2","subject_kind":"lexeme","op":"added"}
{"subject_id":"Q3","predicate_id":"P856","object_raw":"https://example.org","subject_kind":"item","op":"added"}
{"subject_id":"Q3","predicate_id":"P26","object_raw":"Q404","subject_kind":"item","op":"added"}
{"subject_id":"Q2","predicate_id":"P2048","object_raw":"180 centimetres","subject_kind":"item","op":"added"}
{"subject_id":"Q2","predicate_id":"P26","object_raw":"Q1","subject_kind":"item","op":"removed"}
"#;

    fn labels() -> LabelMap {
        [
            ("Q1", "Ada Lovelace"),
            ("Q2", "William King"),
            ("Q3", "Mary Somerville"),
            ("P26", "spouse"),
            ("P856", "official website"),
            ("P2048", "height"),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn end_to_end_bookkeeping() {
        let parsed = parse_delta_stream(DELTAS.as_bytes()).unwrap();
        let ex = extract(&parsed, &labels(), &FilterConfig::default(), 1);
        assert_eq!(ex.triples.len(), 2);
        assert_eq!(ex.duplicates_dropped, 1);
        assert_eq!(ex.rejected["LEXEME"], 1);
        assert_eq!(ex.rejected["URI"], 1);
        assert_eq!(ex.rejected["REMOVED"], 1);
        let reasons: Vec<_> = ex.quarantine.iter().map(|q| (q.line, q.reason.as_str())).collect();
        assert_eq!(reasons, [(3, "MALFORMED_LINE"), (6, "UNRESOLVED_ENTITY")]);
        assert_eq!(refine(&ex.triples, &FilterConfig::default(), 1), ex.triples);
    }

    fn arb_triple() -> impl Strategy<Value = Triple> {
        let word = prop::sample::select(vec![
            "Ada", "Q12", "1234", "x.png", "http://a.b", "spouse", "Oslo", "Template:X", "Berg",
        ]);
        (word.clone(), prop::sample::select(vec!["spouse", "employer"]), word).prop_filter_map(
            "resolved triples only",
            |(s, p, o)| Triple::new(s, p, o).ok(),
        )
    }

    proptest! {
        #[test]
        fn refine_is_idempotent(ts in prop::collection::vec(arb_triple(), 0..40), seed in 0u64..50) {
            let cfg = FilterConfig::default();
            let once = refine(&ts, &cfg, seed);
            prop_assert_eq!(refine(&once, &cfg, seed), once);
        }
    }
}
