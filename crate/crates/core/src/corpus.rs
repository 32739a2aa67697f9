//! Code-query pair ingestion, tokenization, and deterministic splits.
//!
//! Corpus files are UTF-8 with one record per line:
//! `{"id", "lang", "code", "query", "ast"?, "split"?}`. Unknown fields are
//! ignored. Pre-assigned `split` fields override proportional splitting.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::ast::{load_ast, AstTree};
use crate::error::{Error, Result};

/// Which split a pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];
}

/// One code snippet with its natural-language query.
#[derive(Debug, Clone)]
pub struct CodeQueryPair {
    pub id: String,
    pub lang: String,
    pub code: String,
    pub query: String,
    pub ast: Option<AstTree>,
    pub split: Option<Split>,
}

/// Disjoint, exhaustive partition of corpus indices (indices into the
/// loaded pair list, each split in corpus order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl CorpusSplit {
    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn subset<'a>(&self, pairs: &'a [CodeQueryPair], split: Split) -> Vec<&'a CodeQueryPair> {
        self.indices(split).iter().map(|&i| &pairs[i]).collect()
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    lang: String,
    code: String,
    query: String,
    #[serde(default)]
    ast: Option<Value>,
    #[serde(default)]
    split: Option<Split>,
}

/// Load a line-delimited corpus file. Records come back in file order;
/// malformed lines and duplicate ids are rejected.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CodeQueryPair>> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let pair = parse_record(&line, lineno)?;
        if !seen.insert(pair.id.clone()) {
            return Err(Error::DuplicateId { id: pair.id });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

fn parse_record(line: &str, lineno: usize) -> Result<CodeQueryPair> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::CorpusFormat {
        line: lineno,
        message: e.to_string(),
    })?;
    for (field, value) in [("id", &raw.id), ("code", &raw.code), ("query", &raw.query)] {
        if value.is_empty() {
            return Err(Error::CorpusFormat {
                line: lineno,
                message: format!("field \"{field}\" must be non-empty"),
            });
        }
    }
    let ast = match &raw.ast {
        None | Some(Value::Null) => None,
        Some(value) => Some(load_ast(value).map_err(|e| Error::CorpusFormat {
            line: lineno,
            message: e.to_string(),
        })?),
    };
    Ok(CodeQueryPair {
        id: raw.id,
        lang: raw.lang,
        code: raw.code,
        query: raw.query,
        ast,
        split: raw.split,
    })
}

/// Write pairs as a line-delimited corpus file; inverse of [`load_corpus`].
pub fn save_corpus(path: impl AsRef<Path>, pairs: &[CodeQueryPair]) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    for pair in pairs {
        let mut record = json!({
            "id": pair.id,
            "lang": pair.lang,
            "code": pair.code,
            "query": pair.query,
        });
        if let Some(ast) = &pair.ast {
            record["ast"] = ast.to_value();
        }
        if let Some(split) = pair.split {
            record["split"] = json!(split.as_str());
        }
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Split pairs into train/valid/test.
///
/// When any record carries a pre-assigned `split` field, all records must,
/// and the assignment is used as-is. Otherwise the pairs are shuffled
/// deterministically under `seed` and sized by floor rules: valid and test
/// each get `n/10` pairs, the remainder goes to train.
pub fn split_corpus(pairs: &[CodeQueryPair], seed: u64) -> Result<CorpusSplit> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if pairs.iter().any(|p| p.split.is_some()) {
        let mut split = CorpusSplit {
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        };
        for (i, pair) in pairs.iter().enumerate() {
            match pair.split {
                Some(Split::Train) => split.train.push(i),
                Some(Split::Valid) => split.valid.push(i),
                Some(Split::Test) => split.test.push(i),
                None => {
                    return Err(Error::PartialSplitAssignment { id: pair.id.clone() });
                }
            }
        }
        return Ok(split);
    }

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..order.len()).rev() {
        let j = rand::Rng::random_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    let n = pairs.len();
    let hold = n / 10;
    let n_train = n - 2 * hold;
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut valid: Vec<usize> = order[n_train..n_train + hold].to_vec();
    let mut test: Vec<usize> = order[n_train + hold..].to_vec();
    // corpus order within each split keeps sidecar files line-aligned
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();
    Ok(CorpusSplit { train, valid, test })
}

/// Tokenize text or code: split on whitespace and punctuation, split
/// identifiers on underscores and camel-case boundaries, lowercase.
pub fn tokenize_text(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split(|c: char| !c.is_alphanumeric()) {
        if word.is_empty() {
            continue;
        }
        split_subtokens(word, &mut tokens);
    }
    tokens
}

fn split_subtokens(word: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    for i in 1..chars.len() {
        let prev = chars[i - 1];
        let cur = chars[i];
        let next_lower = chars.get(i + 1).is_some_and(|c| c.is_lowercase());
        let boundary = (prev.is_lowercase() && cur.is_uppercase())
            || (prev.is_uppercase() && cur.is_uppercase() && next_lower)
            || (prev.is_alphabetic() && cur.is_numeric())
            || (prev.is_numeric() && cur.is_alphabetic());
        if boundary {
            out.push(chars[start..i].iter().collect::<String>().to_lowercase());
            start = i;
        }
    }
    out.push(chars[start..].iter().collect::<String>().to_lowercase());
}
