use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    Item,
    Lexeme,
    Template,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaOp {
    Added,
    Removed,
}

/// One triple change from a normalized incremental dump.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaRecord {
    pub subject_id: String,
    pub predicate_id: String,
    pub object_raw: String,
    pub subject_kind: SubjectKind,
    pub op: DeltaOp,
}

/// A line that could not be parsed. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDiagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedDeltas {
    /// `(line number, record)` in input order.
    pub records: Vec<(usize, DeltaRecord)>,
    pub diagnostics: Vec<LineDiagnostic>,
}

/// Parses line-delimited JSON delta records. Blank lines are skipped; a
/// malformed line produces a diagnostic and parsing continues. Only an I/O
/// failure aborts.
pub fn parse_delta_stream<R: BufRead>(source: R) -> Result<ParsedDeltas> {
    let mut out = ParsedDeltas::default();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(format!("<delta stream line {line_no}>"), e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match serde_json::from_str::<DeltaRecord>(trimmed) {
            Ok(rec) if rec.subject_id.trim().is_empty() => out.diagnostics.push(LineDiagnostic {
                line: line_no,
                message: "empty subject_id".into(),
            }),
            Ok(rec) => out.records.push((line_no, rec)),
            Err(e) => out.diagnostics.push(LineDiagnostic {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"subject_id":"Q1","predicate_id":"P26","object_raw":"Q2","subject_kind":"item","op":"added"}"#;

    #[test]
    fn empty_input() {
        let p = parse_delta_stream("".as_bytes()).unwrap();
        assert!(p.records.is_empty());
        assert!(p.diagnostics.is_empty());
    }

    #[test]
    fn three_good_lines_in_order() {
        let text = format!(
            "{GOOD}\n{}\n{}\n",
            GOOD.replace("Q1", "Q3"),
            GOOD.replace("Q1", "Q4")
        );
        let p = parse_delta_stream(text.as_bytes()).unwrap();
        let subjects: Vec<_> = p.records.iter().map(|(_, r)| r.subject_id.as_str()).collect();
        assert_eq!(subjects, ["Q1", "Q3", "Q4"]);
        assert_eq!(p.records[2].0, 3);
    }

    #[test]
    fn malformed_line_is_reported_not_dropped() {
        let text = format!("{GOOD}\n{{\"subject_id\": \"Q9\", oops\n{GOOD}\n");
        let p = parse_delta_stream(text.as_bytes()).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.diagnostics.len(), 1);
        assert_eq!(p.diagnostics[0].line, 2);
    }

    #[test]
    fn unknown_kind_and_empty_subject_are_diagnosed() {
        let text = format!(
            "{}\n{}\n",
            GOOD.replace("\"item\"", "\"property\""),
            GOOD.replace("\"Q1\"", "\"\"")
        );
        let p = parse_delta_stream(text.as_bytes()).unwrap();
        assert!(p.records.is_empty());
        assert_eq!(p.diagnostics.iter().map(|d| d.line).collect::<Vec<_>>(), [1, 2]);
    }
}
