//! A small synthetic world of people, places and relations. It supplies
//! background knowledge for pretraining a desk-scale base model and novel
//! triples the base model has never seen.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::mock;
use crate::facts::Triple;

pub const FIRST_NAMES: &[&str] = &[
    "Ada", "Alan", "Anna", "Boris", "Carla", "Chen", "Dora", "Elena", "Emil", "Farid", "Greta",
    "Hugo", "Ines", "Ivan", "Jana", "Karl", "Lena", "Luis", "Maya", "Marco", "Nadia", "Omar",
    "Paula", "Pedro", "Rosa", "Sami", "Tara", "Tomas", "Uma", "Viktor", "Wanda", "Yusuf",
];

pub const SURNAMES: &[&str] = &[
    "Alvarez", "Berg", "Costa", "Dahl", "Eriksen", "Fischer", "Garcia", "Hansen", "Ibsen", "Jensen",
    "Kowal", "Lindqvist", "Moreau", "Novak", "Okafor", "Petrov", "Quinn", "Rossi", "Silva", "Tanaka",
    "Ueda", "Varga", "Weber", "Xu", "Yilmaz", "Zeller", "Lin", "Mbeki",
];

pub const CITIES: &[&str] = &[
    "Lisbon", "Oslo", "Kyoto", "Lagos", "Porto", "Quito", "Riga", "Seville", "Tunis", "Utrecht",
    "Vienna", "Warsaw", "Zagreb", "Bergen", "Cairo", "Dublin", "Geneva", "Hanoi", "Lima", "Malmo",
];

pub const COUNTRIES: &[&str] = &[
    "Denmark", "Portugal", "Japan", "Nigeria", "Peru", "Latvia", "Spain", "Tunisia", "Austria",
    "Poland", "Croatia", "Norway", "Egypt", "Ireland", "Chile", "Vietnam", "Sweden", "Kenya",
];

pub const OCCUPATIONS: &[&str] = &[
    "writer", "painter", "chemist", "architect", "economist", "composer", "surgeon", "linguist",
    "astronomer", "journalist", "sculptor", "geologist", "diplomat", "engineer",
];

pub const ORGANIZATIONS: &[&str] = &[
    "Nordic Rail", "Blue Harbor Bank", "Atlas Robotics", "Green Valley Press", "Orion Labs",
    "Delta Textiles", "Summit Energy", "Coral Studios", "Pioneer Foods", "Helix Pharma",
];

pub const LANGUAGES: &[&str] = &[
    "English", "Italian", "Danish", "Portuguese", "Japanese", "Yoruba", "Spanish", "Latvian",
    "Polish", "Croatian", "Arabic", "Swedish", "Swahili", "Irish",
];

pub const UNIVERSITIES: &[&str] = &[
    "Harbor University", "Northgate College", "Riverside Institute", "Eastfield University",
    "Kingsbridge College", "Lakeshore University", "Westmoor Academy", "Stonehill Institute",
];

pub const AWARDS: &[&str] = &[
    "Golden Quill", "Silver Compass", "Aurora Prize", "Meridian Medal", "Beacon Award",
    "Laurel Cup", "Polaris Prize",
];

pub const TEAMS: &[&str] = &[
    "Riga Falcons", "Porto Mariners", "Oslo Wolves", "Lima Condors", "Kyoto Herons",
    "Dublin Harps", "Vienna Lynx", "Cairo Scarabs",
];

/// Relations of the synthetic world and the pool each object is drawn from.
pub const RELATIONS: &[(&str, &[&str])] = &[
    ("spouse", &[]),
    ("sibling", &[]),
    ("place of birth", CITIES),
    ("residence", CITIES),
    ("country of citizenship", COUNTRIES),
    ("country for sport", COUNTRIES),
    ("occupation", OCCUPATIONS),
    ("employer", ORGANIZATIONS),
    ("language spoken", LANGUAGES),
    ("educated at", UNIVERSITIES),
    ("award received", AWARDS),
    ("member of sports team", TEAMS),
];

/// Every entity label that can appear as an object, grouped by kind.
pub fn object_pool_for(predicate: &str) -> Option<&'static [&'static str]> {
    RELATIONS
        .iter()
        .find(|(p, _)| *p == predicate)
        .map(|(_, pool)| *pool)
}

fn person(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{} {}",
        FIRST_NAMES.choose(rng).unwrap(),
        SURNAMES.choose(rng).unwrap()
    )
}

/// Draws `count` triples with distinct subject/predicate pairs, skipping any
/// pair in `exclude`.
pub fn sample_triples(seed: u64, count: usize, exclude: &HashSet<(String, String)>) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let max_attempts = count * 100 + 1000;
    for _ in 0..max_attempts {
        if out.len() == count {
            break;
        }
        let subject = person(&mut rng);
        let (predicate, pool) = RELATIONS[rng.random_range(0..RELATIONS.len())];
        let key = (subject.clone(), predicate.to_owned());
        if exclude.contains(&key) || seen.contains(&key) {
            continue;
        }
        let object = if pool.is_empty() {
            let mut o = person(&mut rng);
            while o == subject {
                o = person(&mut rng);
            }
            o
        } else {
            pool.choose(&mut rng).unwrap().to_string()
        };
        seen.insert(key);
        out.push(Triple::new(subject, predicate, object).expect("pool labels are non-empty"));
    }
    out
}

/// Sentences that state each background fact in every mock surface form:
/// the declarative sentence plus each cloze completed with the object.
pub fn background_corpus(triples: &[Triple]) -> Vec<String> {
    let mut out = Vec::with_capacity(triples.len() * 6);
    for t in triples {
        out.push(mock::training_sentence(t));
        for cloze in mock::cloze_sentences(t) {
            out.push(format!("{cloze} {}.", t.object));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_is_deterministic_and_unique() {
        let a = sample_triples(5, 200, &HashSet::new());
        let b = sample_triples(5, 200, &HashSet::new());
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        let keys: HashSet<_> = a.iter().map(|t| (&t.subject, &t.predicate)).collect();
        assert_eq!(keys.len(), 200);
    }

    #[test]
    fn exclusion_is_honored() {
        let a = sample_triples(5, 50, &HashSet::new());
        let exclude: HashSet<_> = a.iter().map(|t| (t.subject.clone(), t.predicate.clone())).collect();
        let b = sample_triples(5, 50, &exclude);
        assert!(b.iter().all(|t| !exclude.contains(&(t.subject.clone(), t.predicate.clone()))));
    }
}
