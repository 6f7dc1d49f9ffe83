//! Subsets, sweep specs, sweep execution and reports.

mod base;
mod regress;
mod report;
mod runner;
mod spec;
mod subsets;

pub use base::{background_facts, novel_facts, obtain_base, pretrain_world_base, world_base_cache_name};
pub use regress::{regress_sweep, sample_runs, RegressRow, REGRESS_CSV};
pub use report::{aggregate, collect_rows, write_report, AggregateRow, AGGREGATES_CSV, AGGREGATES_JSON};
pub use runner::{
    evaluate_baseline, evaluate_run, read_summary, run_seed, run_sweep, train_on_records, write_summary,
    BaselineReport, RunArtifacts, RunFailure, RunManifest, RunStatus, SummaryRow, SweepOutcome, FAILURES_JSON,
    SUMMARY_CSV,
};
pub use spec::*;
pub use subsets::{make_subsets, subset_count, DEFAULT_K_VALUES};
