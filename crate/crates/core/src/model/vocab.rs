//! Token vocabularies with reserved padding and unknown ids.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Bijective token-to-id map with id 0 reserved for padding and id 1 for
/// unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl Vocabulary {
    /// Just the reserved entries; every real token maps to unknown.
    pub fn reserved_only() -> Self {
        Self::from_tokens(vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()])
            .expect("reserved entries are valid")
    }

    /// Count tokens across sequences, keep those seen at least `min_count`
    /// times, and cap the non-reserved size at `cap`. Ties order by
    /// (count desc, token asc) so construction is deterministic.
    pub fn build<'a, I>(sequences: I, cap: usize, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in sequences {
            for token in seq {
                *counts.entry(token.as_str()).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(token, count)| {
                count >= min_count && token != PAD_TOKEN && token != UNK_TOKEN
            })
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries.truncate(cap);

        let mut tokens = Vec::with_capacity(entries.len() + 2);
        tokens.push(PAD_TOKEN.to_string());
        tokens.push(UNK_TOKEN.to_string());
        tokens.extend(entries.into_iter().map(|(t, _)| t.to_string()));
        Self::from_tokens(tokens).expect("constructed tokens are unique")
    }

    /// Rebuild from an ordered token list (checkpoint load).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::Checkpoint(
                "vocabulary must start with the reserved <pad> and <unk> entries".into(),
            ));
        }
        let mut lookup = HashMap::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            if lookup.insert(token.clone(), i as u32).is_some() {
                return Err(Error::Checkpoint(format!(
                    "duplicate vocabulary entry \"{token}\""
                )));
            }
        }
        Ok(Vocabulary { tokens, lookup })
    }

    pub fn id(&self, token: &str) -> u32 {
        self.lookup.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}
