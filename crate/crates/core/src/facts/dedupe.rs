use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::resolve::Triple;

/// Seed for the generator that picks the survivor of one (subject, predicate)
/// group. Derived only from the key, so stream order never matters.
fn group_seed(seed: u64, subject: &str, predicate: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((subject.len() as u64).to_le_bytes());
    h.update(subject.as_bytes());
    h.update((predicate.len() as u64).to_le_bytes());
    h.update(predicate.as_bytes());
    h.finalize().into()
}

/// Keeps one triple per (subject, predicate), picked uniformly at random
/// under `seed`. Groups appear in order of their first occurrence.
pub fn dedupe_subject_predicate(triples: &[Triple], seed: u64) -> Vec<Triple> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut groups: HashMap<(&str, &str), Vec<&Triple>> = HashMap::new();
    for t in triples {
        let key = (t.subject.as_str(), t.predicate.as_str());
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(t);
    }
    order
        .into_iter()
        .map(|key| {
            let mut members = groups.remove(&key).expect("group exists");
            if members.len() == 1 {
                return members[0].clone();
            }
            members.sort();
            let mut rng = ChaCha8Rng::from_seed(group_seed(seed, key.0, key.1));
            members[rng.random_range(0..members.len())].clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, HashSet};

    use super::*;

    fn t(s: &str, p: &str, o: &str) -> Triple {
        Triple::new(s, p, o).unwrap()
    }

    #[test]
    fn unique_keys_are_untouched() {
        let input = vec![t("a", "p", "x"), t("b", "p", "y"), t("a", "q", "z")];
        assert_eq!(dedupe_subject_predicate(&input, 7), input);
    }

    #[test]
    fn one_survivor_stable_under_seed_and_order() {
        let input = vec![t("a", "p", "x"), t("a", "p", "y"), t("a", "p", "z")];
        let out = dedupe_subject_predicate(&input, 3);
        assert_eq!(out.len(), 1);
        assert_eq!(dedupe_subject_predicate(&input, 3), out);
        let mut reversed = input.clone();
        reversed.reverse();
        assert_eq!(dedupe_subject_predicate(&reversed, 3), out);
    }

    fn fixture() -> Vec<Triple> {
        let mut v = Vec::new();
        for g in 0..10 {
            for o in 0..=(g % 4 + 1) {
                v.push(t(&format!("s{g}"), "p", &format!("o{g}_{o}")));
            }
        }
        v
    }

    #[test]
    fn each_group_contributes_exactly_one() {
        let input = fixture();
        for seed in [1u64, 2] {
            let out = dedupe_subject_predicate(&input, seed);
            assert_eq!(out.len(), 10);
            let keys: HashSet<_> = out.iter().map(|t| (&t.subject, &t.predicate)).collect();
            assert_eq!(keys.len(), 10);
            assert!(out.iter().all(|o| input.contains(o)));
        }
    }

    #[test]
    fn survivors_are_roughly_uniform() {
        // 4 candidates, 4000 seeds: each should survive about 1000 times.
        let input: Vec<_> = (0..4).map(|o| t("s", "p", &format!("o{o}"))).collect();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for seed in 0..4000 {
            let out = dedupe_subject_predicate(&input, seed);
            *counts.entry(out[0].object.clone()).or_default() += 1;
        }
        assert_eq!(counts.len(), 4);
        assert!(counts.values().all(|&c| (850..=1150).contains(&c)), "{counts:?}");
    }
}
