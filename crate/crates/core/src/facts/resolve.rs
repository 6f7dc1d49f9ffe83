use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::delta::DeltaRecord;
use super::filter::is_entity_id;
use crate::error::{Error, Result};

/// A resolved, human-readable fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Result<Self> {
        let t = Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("subject", &self.subject),
            ("predicate", &self.predicate),
            ("object", &self.object),
        ] {
            if v.trim().is_empty() {
                return Err(Error::validation(format!("triple {name} is empty")));
            }
            if let Some(tok) = v.split_whitespace().find(|t| is_entity_id(t)) {
                return Err(Error::UnresolvedEntity(tok.to_owned()));
            }
        }
        Ok(())
    }
}

/// English labels keyed by entity id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap {
    labels: HashMap<String, String>,
}

#[derive(Deserialize)]
struct LabelLine {
    id: String,
    label: String,
}

impl LabelMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rejects empty labels and conflicting duplicates. Repeating an identical
    /// pair is harmless.
    pub fn insert(&mut self, id: impl Into<String>, label: impl Into<String>) -> Result<()> {
        let (id, label) = (id.into(), label.into());
        if id.trim().is_empty() || label.trim().is_empty() {
            return Err(Error::validation(format!("empty id or label for `{id}`")));
        }
        if let Some(prev) = self.labels.get(&id) {
            if *prev != label {
                return Err(Error::validation(format!(
                    "conflicting labels for `{id}`: `{prev}` vs `{label}`"
                )));
            }
            return Ok(());
        }
        self.labels.insert(id, label);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Reads JSONL lines of `{"id": ..., "label": ...}`.
    pub fn from_jsonl<R: BufRead>(source: R) -> Result<Self> {
        let mut map = Self::new();
        for (i, line) in source.lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("<labels line {}>", i + 1), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LabelLine = serde_json::from_str(&line)
                .map_err(|e| Error::validation(format!("labels line {}: {e}", i + 1)))?;
            map.insert(parsed.id, parsed.label)
                .map_err(|e| Error::validation(format!("labels line {}: {e}", i + 1)))?;
        }
        Ok(map)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for LabelMap {
    /// Panics on invalid pairs; intended for literals and tests.
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut map = Self::new();
        for (k, v) in iter {
            map.insert(k, v).expect("valid label pair");
        }
        map
    }
}

/// Replaces every whitespace-delimited entity id with its label; other text
/// passes through. A label that itself looks like an id is treated as missing.
fn resolve_text(raw: &str, labels: &LabelMap) -> Result<String> {
    let raw = raw.trim();
    if !raw.split_whitespace().any(is_entity_id) {
        return Ok(raw.to_owned());
    }
    let mut parts = Vec::new();
    for tok in raw.split_whitespace() {
        if is_entity_id(tok) {
            match labels.get(tok) {
                Some(label) if !label.split_whitespace().any(is_entity_id) => parts.push(label.trim()),
                _ => return Err(Error::UnresolvedEntity(tok.to_owned())),
            }
        } else {
            parts.push(tok);
        }
    }
    Ok(parts.join(" "))
}

/// Turns an accepted delta record into a readable triple.
pub fn resolve_links(rec: &DeltaRecord, labels: &LabelMap) -> Result<Triple> {
    let t = Triple {
        subject: resolve_text(&rec.subject_id, labels)?,
        predicate: resolve_text(&rec.predicate_id, labels)?,
        object: resolve_text(&rec.object_raw, labels)?,
    };
    t.validate()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::delta::{DeltaOp, SubjectKind};

    fn rec(s: &str, p: &str, o: &str) -> DeltaRecord {
        DeltaRecord {
            subject_id: s.into(),
            predicate_id: p.into(),
            object_raw: o.into(),
            subject_kind: SubjectKind::Item,
            op: DeltaOp::Added,
        }
    }

    fn labels() -> LabelMap {
        [
            ("Q4583", "Frances Allen"),
            ("P26", "spouse"),
            ("Q92638", "Jacob Schwartz"),
            ("P2048", "height"),
            ("Q174728", "centimetres"),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn table_one_fact() {
        let t = resolve_links(&rec("Q4583", "P26", "Q92638"), &labels()).unwrap();
        assert_eq!(t, Triple::new("Frances Allen", "spouse", "Jacob Schwartz").unwrap());
    }

    #[test]
    fn literal_passes_through() {
        let t = resolve_links(&rec("Q4583", "P2048", "180 centimetres"), &labels()).unwrap();
        assert_eq!(t.object, "180 centimetres");
        let t = resolve_links(&rec("Q4583", "P2048", "180 Q174728"), &labels()).unwrap();
        assert_eq!(t.object, "180 centimetres");
    }

    #[test]
    fn missing_label_is_an_error() {
        match resolve_links(&rec("Q4583", "P26", "Q999"), &labels()) {
            Err(Error::UnresolvedEntity(id)) => assert_eq!(id, "Q999"),
            other => panic!("expected UnresolvedEntity, got {other:?}"),
        }
    }

    #[test]
    fn id_shaped_label_is_not_trusted() {
        let mut l = labels();
        l.insert("Q5", "Q6").unwrap();
        assert!(matches!(
            resolve_links(&rec("Q4583", "P26", "Q5"), &l),
            Err(Error::UnresolvedEntity(_))
        ));
    }

    #[test]
    fn label_file_rules() {
        let ok = "{\"id\":\"Q1\",\"label\":\"A\"}\n\n{\"id\":\"Q1\",\"label\":\"A\"}\n";
        assert_eq!(LabelMap::from_jsonl(ok.as_bytes()).unwrap().len(), 1);
        let clash = "{\"id\":\"Q1\",\"label\":\"A\"}\n{\"id\":\"Q1\",\"label\":\"B\"}\n";
        assert!(LabelMap::from_jsonl(clash.as_bytes()).is_err());
        let empty = "{\"id\":\"Q1\",\"label\":\" \"}\n";
        assert!(LabelMap::from_jsonl(empty.as_bytes()).is_err());
    }
}
