//! Deterministic stand-ins for every generation step. No network.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::facts::Triple;
use crate::world;

/// Verb phrase used to state a predicate. Unknown predicates fall back to
/// `has <predicate>`.
pub fn predicate_phrase(predicate: &str) -> String {
    let known = match predicate {
        "spouse" => "is married to",
        "sibling" => "is a sibling of",
        "place of birth" => "was born in",
        "place of death" => "died in",
        "residence" => "lives in",
        "country of citizenship" => "is a citizen of",
        "country for sport" => "competes for",
        "occupation" => "works as a",
        "employer" => "is employed by",
        "language spoken" => "speaks",
        "educated at" => "studied at",
        "award received" => "received the",
        "member of sports team" => "plays for",
        _ => return format!("has {predicate}"),
    };
    known.to_owned()
}

/// `<subject> <predicate-as-phrase>`, the training sentence up to the object.
pub fn training_stem(t: &Triple) -> String {
    format!("{} {}", t.subject, predicate_phrase(&t.predicate))
}

pub fn training_sentence(t: &Triple) -> String {
    format!("{} {}.", training_stem(t), t.object)
}

pub fn cloze_sentences(t: &Triple) -> Vec<String> {
    let (s, p) = (&t.subject, &t.predicate);
    let phrase = predicate_phrase(p);
    vec![
        format!("The {p} of {s} is"),
        format!("{s}'s {p} is"),
        format!("It is known that {s} {phrase}"),
        format!("According to the records, {s} {phrase}"),
        format!("When asked about the {p} of {s}, the answer is"),
    ]
}

pub fn question(t: &Triple) -> String {
    format!("What is the {} of {}?", t.predicate, t.subject)
}

fn fallback_pool() -> Vec<&'static str> {
    world::RELATIONS
        .iter()
        .flat_map(|(_, pool)| pool.iter().copied())
        .collect()
}

/// Four candidate answers drawn from the object's pool. The truth may be among
/// them, as it may be for a real endpoint.
pub fn distractor_candidates(t: &Triple, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<String> = Vec::with_capacity(4);
    let pool: Vec<String> = match world::object_pool_for(&t.predicate) {
        Some([]) => {
            // person-valued relation
            let mut people = Vec::new();
            for f in world::FIRST_NAMES.iter().take(8) {
                for s in world::SURNAMES.iter().take(8) {
                    people.push(format!("{f} {s}"));
                }
            }
            people
        }
        Some(pool) => pool.iter().map(|s| s.to_string()).collect(),
        None => fallback_pool().into_iter().map(str::to_owned).collect(),
    };
    let pool: Vec<&String> = pool
        .iter()
        .filter(|c| !c.eq_ignore_ascii_case(&t.subject))
        .collect();
    for _ in 0..64 {
        if out.len() == 4 {
            break;
        }
        let c = (*pool.choose(&mut rng).expect("non-empty pool")).clone();
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_sentence() {
        let t = Triple::new("Frances Allen", "spouse", "Jacob Schwartz").unwrap();
        assert_eq!(training_sentence(&t), "Frances Allen is married to Jacob Schwartz.");
        assert_eq!(cloze_sentences(&t)[0], "The spouse of Frances Allen is");
        assert_eq!(cloze_sentences(&t)[1], "Frances Allen's spouse is");
        assert_eq!(question(&t), "What is the spouse of Frances Allen?");
    }

    #[test]
    fn unknown_predicate_falls_back() {
        let t = Triple::new("Ada", "favourite colour", "green").unwrap();
        assert_eq!(training_sentence(&t), "Ada has favourite colour green.");
        assert_eq!(distractor_candidates(&t, 1).len(), 4);
    }

    #[test]
    fn clozes_are_distinct() {
        let t = Triple::new("Ada Berg", "employer", "Orion Labs").unwrap();
        let c = cloze_sentences(&t);
        let set: std::collections::HashSet<_> = c.iter().collect();
        assert_eq!(set.len(), 5);
    }
}
