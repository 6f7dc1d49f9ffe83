//! Turning knowledge-base deltas into clean, deduplicated triples.

mod dedupe;
mod delta;
mod filter;
mod pipeline;
mod resolve;

pub use dedupe::dedupe_subject_predicate;
pub use delta::{parse_delta_stream, DeltaOp, DeltaRecord, LineDiagnostic, ParsedDeltas, SubjectKind};
pub use filter::{
    filter_triple, is_entity_id, is_filename, is_numeric, is_uri, FilterConfig, FilterDecision, RejectReason,
    DEFAULT_FILE_EXTENSIONS,
};
pub use pipeline::{extract, filter_resolved, read_triples_jsonl, refine, write_jsonl, Extraction, QuarantineEntry};
pub use resolve::{resolve_links, LabelMap, Triple};
