use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenUnit {
    Byte,
    Word,
}

/// Byte-level or whitespace-word tokenizer.
///
/// Byte mode covers all 256 byte values, so `decode(encode(s)) == s` for any
/// string. Word mode is closed-vocabulary: unknown words are an error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tokenizer {
    unit: TokenUnit,
    vocabulary: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Tokenizer {
    pub fn bytes() -> Self {
        Self {
            unit: TokenUnit::Byte,
            vocabulary: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn words(vocabulary: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(vocabulary.len());
        for (i, w) in vocabulary.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::config(format!("invalid word unit {w:?}")));
            }
            if index.insert(w.clone(), i as u32).is_some() {
                return Err(Error::config(format!("duplicate word unit {w:?}")));
            }
        }
        Ok(Self {
            unit: TokenUnit::Word,
            vocabulary,
            index,
        })
    }

    pub fn unit(&self) -> TokenUnit {
        self.unit
    }

    pub fn vocab_size(&self) -> usize {
        match self.unit {
            TokenUnit::Byte => 256,
            TokenUnit::Word => self.vocabulary.len(),
        }
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        match self.unit {
            TokenUnit::Byte => Ok(text.bytes().map(u32::from).collect()),
            TokenUnit::Word => text
                .split_whitespace()
                .map(|w| {
                    self.lookup(w)
                        .ok_or_else(|| Error::validation(format!("out-of-vocabulary word {w:?}")))
                })
                .collect(),
        }
    }

    /// Decodes tokens to text. In byte mode a multi-byte sequence cut off at the
    /// end is dropped; invalid sequences elsewhere are replaced.
    pub fn decode(&self, tokens: &[u32]) -> String {
        match self.unit {
            TokenUnit::Byte => {
                let bytes: Vec<u8> = tokens.iter().map(|&t| t as u8).collect();
                decode_utf8_truncating(&bytes)
            }
            TokenUnit::Word => tokens
                .iter()
                .filter_map(|&t| self.vocabulary.get(t as usize).map(String::as_str))
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    fn lookup(&self, w: &str) -> Option<u32> {
        if self.index.is_empty() && !self.vocabulary.is_empty() {
            return self.vocabulary.iter().position(|v| v == w).map(|i| i as u32);
        }
        self.index.get(w).copied()
    }
}

fn decode_utf8_truncating(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(e) if e.error_len().is_none() => {
            String::from_utf8_lossy(&bytes[..e.valid_up_to()]).into_owned()
        }
        Err(_) => {
            // Lossy for interior damage, then trim a dangling tail.
            let mut end = bytes.len();
            while end > 0 {
                if let Err(e) = std::str::from_utf8(&bytes[..end]) {
                    if e.error_len().is_none() {
                        end = e.valid_up_to();
                        continue;
                    }
                }
                break;
            }
            let mut out = String::from_utf8_lossy(&bytes[..end]).into_owned();
            if end < bytes.len() && out.ends_with('\u{FFFD}') {
                out.pop();
            }
            out
        }
    }
}
