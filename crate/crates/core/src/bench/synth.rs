use std::fs;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::Generator;
use super::prompts::PROMPT_VERSION;
use super::record::{assemble_fact_record, fact_id, validate_fact_record, FactRecord, GenAudit};
use crate::error::{Error, Result};
use crate::facts::{write_jsonl, Triple};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthFailure {
    pub index: usize,
    pub id: String,
    pub triple: Triple,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub input_triples: usize,
    pub records: usize,
    pub quarantined: usize,
    pub flagged_for_review: usize,
    pub prompt_version: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Synthesis {
    pub records: Vec<FactRecord>,
    /// One entry per input triple, in input order.
    pub audits: Vec<GenAudit>,
    pub quarantine: Vec<SynthFailure>,
    pub summary: SynthSummary,
}

/// Builds all parts of one record.
pub fn synthesize_record(gen: &Generator, t: &Triple) -> (Result<FactRecord>, GenAudit) {
    let mut audit = GenAudit {
        id: fact_id(t),
        triple: Some(t.clone()),
        prompt_version: PROMPT_VERSION.into(),
        ..GenAudit::default()
    };
    let result = (|| {
        t.validate()?;
        let training = gen.gen_training_sentence(t, &mut audit)?;
        let clozes = gen.gen_cloze_sentences(t, &mut audit)?;
        let question = gen.gen_question(t, &mut audit)?;
        let distractors = gen.gen_distractors(t, &question, &mut audit)?;
        assemble_fact_record(t, training, clozes, question, distractors, gen.seed())
    })();
    if let Err(e) = &result {
        audit.outcomes.push(format!("failed: {e}"));
    }
    (result, audit)
}

/// One record per triple that survives generation; failures are quarantined
/// and never stop the batch. Output order follows input order.
pub fn synthesize_benchmark(triples: &[Triple], gen: &Generator) -> Result<Synthesis> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(gen.config().max_concurrent)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let results: Vec<(Result<FactRecord>, GenAudit)> =
        pool.install(|| triples.par_iter().map(|t| synthesize_record(gen, t)).collect());

    let mut out = Synthesis::default();
    for (index, (res, audit)) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => out.records.push(rec),
            Err(e) => out.quarantine.push(SynthFailure {
                index,
                id: audit.id.clone(),
                triple: triples[index].clone(),
                reason: e.to_string(),
            }),
        }
        out.audits.push(audit);
    }
    out.summary = SynthSummary {
        input_triples: triples.len(),
        records: out.records.len(),
        quarantined: out.quarantine.len(),
        flagged_for_review: out.audits.iter().filter(|a| a.needs_review).count(),
        prompt_version: PROMPT_VERSION.into(),
    };
    Ok(out)
}

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const QUARANTINE_FILE: &str = "quarantine.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes dataset, audit, quarantine and summary files into `dir`.
pub fn write_synthesis(dir: &Path, s: &Synthesis) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(create(&dir.join(DATASET_FILE))?, &s.records)?;
    write_jsonl(create(&dir.join(AUDIT_FILE))?, &s.audits)?;
    write_jsonl(create(&dir.join(QUARANTINE_FILE))?, &s.quarantine)?;
    let summary = serde_json::to_string_pretty(&s.summary)?;
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, summary + "\n").map_err(|e| Error::io(&path, e))
}

/// Loads and validates a dataset file. Any invalid record fails the load.
pub fn read_dataset(path: &Path) -> Result<Vec<FactRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FactRecord = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("{} line {}: {e}", path.display(), i + 1)))?;
        validate_fact_record(&rec)
            .map_err(|e| Error::validation(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::bench::endpoint::GenEndpointConfig;
    use crate::world::sample_triples;

    #[test]
    fn one_bad_triple_is_quarantined() {
        let mut triples = sample_triples(3, 10, &HashSet::new());
        // the object sits inside the subject, so every cloze leaks it
        triples[4] = Triple::new("Ada Berg", "employer", "Berg").unwrap();
        let gen = Generator::new(GenEndpointConfig::mock(), 1).unwrap();
        let s = synthesize_benchmark(&triples, &gen).unwrap();
        assert_eq!(s.records.len(), 9);
        assert_eq!(s.quarantine.len(), 1);
        assert_eq!(s.quarantine[0].index, 4);
        assert_eq!(s.audits.len(), 10);
    }

    #[test]
    fn mock_output_is_byte_identical() {
        let triples = sample_triples(9, 20, &HashSet::new());
        let dir = tempfile::tempdir().unwrap();
        for run in ["a", "b"] {
            let gen = Generator::new(GenEndpointConfig::mock(), 5).unwrap();
            let s = synthesize_benchmark(&triples, &gen).unwrap();
            write_synthesis(&dir.path().join(run), &s).unwrap();
        }
        for f in [DATASET_FILE, AUDIT_FILE, QUARANTINE_FILE, SUMMARY_FILE] {
            let a = fs::read(dir.path().join("a").join(f)).unwrap();
            let b = fs::read(dir.path().join("b").join(f)).unwrap();
            assert_eq!(a, b, "{f}");
        }
        let back = read_dataset(&dir.path().join("a").join(DATASET_FILE)).unwrap();
        assert_eq!(back.len(), 20);
    }
}
