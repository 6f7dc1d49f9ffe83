//! Turning triples into benchmark records: training sentence, cloze tests and
//! a four-way multiple-choice question.

mod endpoint;
mod generate;
pub mod mock;
pub mod prompts;
mod record;
mod synth;

pub use endpoint::{Completer, CompletionRequest, GenEndpointConfig, GenMode, HttpCompleter, ScriptedCompleter};
pub use generate::{clean_cloze, select_distractors, DistractorSelection, Generator};
pub use record::{
    assemble_fact_record, contains_ci, fact_id, normalize, validate_fact_record, FactRecord, GenAudit, NUM_CHOICES,
    NUM_CLOZES,
};
pub use synth::{
    read_dataset, synthesize_benchmark, synthesize_record, write_synthesis, SynthFailure, SynthSummary, Synthesis,
    AUDIT_FILE, DATASET_FILE, QUARANTINE_FILE, SUMMARY_FILE,
};
