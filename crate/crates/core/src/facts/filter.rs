//! Record-level acceptance rules.

use serde::{Deserialize, Serialize};

use super::delta::{DeltaOp, DeltaRecord, SubjectKind};

/// Stable rejection codes. The string form is what lands in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    Removed,
    Empty,
    Lexeme,
    Template,
    NumericId,
    Filename,
    Uri,
}

impl RejectReason {
    pub const ALL: [RejectReason; 7] = [
        RejectReason::Removed,
        RejectReason::Empty,
        RejectReason::Lexeme,
        RejectReason::Template,
        RejectReason::NumericId,
        RejectReason::Filename,
        RejectReason::Uri,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Removed => "REMOVED",
            RejectReason::Empty => "EMPTY",
            RejectReason::Lexeme => "LEXEME",
            RejectReason::Template => "TEMPLATE",
            RejectReason::NumericId => "NUMERIC_ID",
            RejectReason::Filename => "FILENAME",
            RejectReason::Uri => "URI",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Accept,
    Reject(RejectReason),
}

impl FilterDecision {
    pub fn is_accept(self) -> bool {
        matches!(self, FilterDecision::Accept)
    }
}

pub const DEFAULT_FILE_EXTENSIONS: &[&str] = &[
    "jpg", "jpeg", "png", "gif", "svg", "tif", "tiff", "webp", "bmp", "pdf", "djvu", "ogg", "oga",
    "ogv", "mp3", "wav", "flac", "webm", "mp4", "mid", "txt", "doc", "docx", "xls", "xlsx", "csv",
    "json", "xml", "tab", "map", "stl", "zip",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Lower-case extensions without the dot.
    pub file_extensions: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            file_extensions: DEFAULT_FILE_EXTENSIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// `Q123`, `P31` or `L7`.
pub fn is_entity_id(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some('Q' | 'P' | 'L'))
        && s.len() > 1
        && chars.all(|c| c.is_ascii_digit())
}

pub fn is_lexeme_id(s: &str) -> bool {
    s.starts_with('L') && is_entity_id(s)
}

pub fn is_numeric(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
}

/// A scheme prefix such as `https://`, `urn:` or `mailto:`.
pub fn is_uri(s: &str) -> bool {
    let s = s.trim();
    let Some(colon) = s.find(':') else {
        return false;
    };
    let scheme = &s[..colon];
    let valid_scheme = !scheme.is_empty()
        && scheme.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && scheme
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    if !valid_scheme {
        return false;
    }
    let rest = &s[colon + 1..];
    rest.starts_with("//")
        || matches!(
            scheme.to_ascii_lowercase().as_str(),
            "urn" | "mailto" | "doi" | "isbn" | "tel"
        )
}

pub fn is_filename(s: &str, cfg: &FilterConfig) -> bool {
    let s = s.trim();
    if s.starts_with("File:") || s.starts_with("Media:") {
        return true;
    }
    match s.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() && !ext.contains(' ') => {
            let ext = ext.to_ascii_lowercase();
            cfg.file_extensions.iter().any(|e| *e == ext)
        }
        _ => false,
    }
}

fn is_template(s: &str) -> bool {
    s.trim_start().starts_with("Template:")
}

/// Decides whether a delta record can become a fact. Total and deterministic.
pub fn filter_triple(rec: &DeltaRecord, cfg: &FilterConfig) -> FilterDecision {
    use FilterDecision::Reject;
    if rec.op != DeltaOp::Added {
        return Reject(RejectReason::Removed);
    }
    let fields = [&rec.subject_id, &rec.predicate_id, &rec.object_raw];
    if fields.iter().any(|f| f.trim().is_empty()) {
        return Reject(RejectReason::Empty);
    }
    if rec.subject_kind == SubjectKind::Lexeme || is_lexeme_id(&rec.subject_id) || is_lexeme_id(&rec.object_raw) {
        return Reject(RejectReason::Lexeme);
    }
    if rec.subject_kind == SubjectKind::Template || is_template(&rec.subject_id) || is_template(&rec.object_raw) {
        return Reject(RejectReason::Template);
    }
    for value in [&rec.subject_id, &rec.object_raw] {
        if is_numeric(value.trim()) {
            return Reject(RejectReason::NumericId);
        }
        if is_uri(value) {
            return Reject(RejectReason::Uri);
        }
        if is_filename(value, cfg) {
            return Reject(RejectReason::Filename);
        }
    }
    FilterDecision::Accept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(subject: &str, object: &str, kind: SubjectKind) -> DeltaRecord {
        DeltaRecord {
            subject_id: subject.into(),
            predicate_id: "P26".into(),
            object_raw: object.into(),
            subject_kind: kind,
            op: DeltaOp::Added,
        }
    }

    fn decide(subject: &str, object: &str, kind: SubjectKind) -> FilterDecision {
        filter_triple(&rec(subject, object, kind), &FilterConfig::default())
    }

    #[test]
    fn lexeme_subject_rejected() {
        assert_eq!(
            decide("L123", "Q5", SubjectKind::Lexeme),
            FilterDecision::Reject(RejectReason::Lexeme)
        );
    }

    #[test]
    fn uri_object_rejected() {
        assert_eq!(
            decide("Q1", "https://example.org/x", SubjectKind::Item),
            FilterDecision::Reject(RejectReason::Uri)
        );
        assert_eq!(
            decide("Q1", "urn:isbn:0451450523", SubjectKind::Item),
            FilterDecision::Reject(RejectReason::Uri)
        );
    }

    #[test]
    fn ordinary_item_accepted() {
        assert_eq!(decide("Q1", "Q2", SubjectKind::Item), FilterDecision::Accept);
        assert_eq!(decide("Q1", "180 Q174728", SubjectKind::Item), FilterDecision::Accept);
        assert_eq!(decide("Q1", "Dr. Smith", SubjectKind::Item), FilterDecision::Accept);
    }

    #[test]
    fn other_rejections() {
        assert_eq!(
            decide("Q1", "Template:Infobox person", SubjectKind::Item),
            FilterDecision::Reject(RejectReason::Template)
        );
        assert_eq!(
            decide("Q1", "Q2", SubjectKind::Template),
            FilterDecision::Reject(RejectReason::Template)
        );
        assert_eq!(
            decide("12345", "Q2", SubjectKind::Item),
            FilterDecision::Reject(RejectReason::NumericId)
        );
        assert_eq!(
            decide("Q1", "Portrait of Ada.JPG", SubjectKind::Item),
            FilterDecision::Reject(RejectReason::Filename)
        );
        assert_eq!(
            decide("Q1", "  ", SubjectKind::Item),
            FilterDecision::Reject(RejectReason::Empty)
        );
        let mut r = rec("Q1", "Q2", SubjectKind::Item);
        r.op = DeltaOp::Removed;
        assert_eq!(
            filter_triple(&r, &FilterConfig::default()),
            FilterDecision::Reject(RejectReason::Removed)
        );
    }

    #[test]
    fn codes_are_distinct() {
        let codes: std::collections::HashSet<_> = RejectReason::ALL.iter().map(|r| r.code()).collect();
        assert_eq!(codes.len(), RejectReason::ALL.len());
        assert_eq!(
            serde_json::to_string(&RejectReason::NumericId).unwrap(),
            "\"NUMERIC_ID\""
        );
    }
}
