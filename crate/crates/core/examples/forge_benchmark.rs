//! Build benchmark records from triples, first with the built-in mock
//! generator and then with a scripted endpoint that misbehaves.
//!
//! Run with `cargo run --example forge_benchmark`.

use factforge::bench::{
    synthesize_benchmark, validate_fact_record, GenEndpointConfig, Generator, ScriptedCompleter,
};
use factforge::experiment::{novel_facts, WorldBase};
use factforge::facts::Triple;

fn main() -> factforge::Result<()> {
    let triples = novel_facts(&WorldBase::default(), 4, 7);
    let gen = Generator::new(GenEndpointConfig::mock(), 0)?;
    let syn = synthesize_benchmark(&triples, &gen)?;
    let r = &syn.records[0];
    println!("{}  ({}, {}, {})", r.id, r.triple.subject, r.triple.predicate, r.triple.object);
    println!("  train : {}", r.training_sentence);
    for c in &r.cloze_sentences {
        println!("  cloze : {c} ___");
    }
    println!("  mcq   : {}", r.question);
    for (i, c) in r.choices.iter().enumerate() {
        let mark = if i == r.answer_index { "*" } else { " " };
        println!("        {mark} {c}");
    }
    println!("summary: {:?}\n", syn.summary);

    // A remote endpoint is just a `Completer`. This scripted one returns a
    // cloze list with a leaked object and too few usable lines, so the
    // generator asks again and keeps what it already accepted.
    let t = Triple::new("Frances Allen", "spouse", "Jacob Schwartz")?;
    let script = ScriptedCompleter::new([
        "Frances Allen is married to Jacob Schwartz.",
        "1. Frances Allen's spouse, Jacob Schwartz, was a computer scientist\n2. Frances Allen is married to\n3. The spouse of Frances Allen is Jacob Schwartz.",
        "1. Frances Allen's husband is\n2. According to the records, Frances Allen married\n3. When asked, Frances Allen named her spouse as\n4. The person Frances Allen married is",
        "Who is the spouse of Frances Allen?",
        "Ada Berg\nJacob Schwartz\nLi Wei\nMarta Kowalski\nJohn Smith",
    ]);
    let gen = Generator::with_completer(GenEndpointConfig::mock(), Box::new(script), 0)?;
    let syn = synthesize_benchmark(&[t], &gen)?;
    match syn.records.first() {
        Some(r) => {
            validate_fact_record(r)?;
            println!("scripted record ok:");
            for c in &r.cloze_sentences {
                println!("  cloze : {c} ___");
            }
            println!("  choices {:?}, answer {}", r.choices, r.answer_index);
            for o in &syn.audits[0].outcomes {
                println!("  audit : {o}");
            }
        }
        None => println!("scripted record quarantined: {:?}", syn.quarantine),
    }
    Ok(())
}
