//! Brute-force cosine index over encoded snippets.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::CodeQueryPair;
use crate::error::{Error, Result};
use crate::model::Checkpoint;
use crate::pipeline;

const MAGIC: &[u8; 8] = b"SSTIDX01";
const PREVIEW_CHARS: usize = 60;

/// What a search result points back to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetRef {
    pub id: String,
    pub lang: String,
    pub preview: String,
}

/// Unit-normalized snippet vectors with parallel references. Zero vectors
/// (all-unknown snippets) are stored as zero and always rank last.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    dim: usize,
    vectors: Vec<f32>,
    refs: Vec<SnippetRef>,
    skipped: usize,
}

impl SearchIndex {
    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Snippets that could not be encoded (tree-based modes only).
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn refs(&self) -> &[SnippetRef] {
        &self.refs
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

fn preview_of(code: &str) -> String {
    let first = code.lines().next().unwrap_or("").trim();
    first.chars().take(PREVIEW_CHARS).collect()
}

/// Encode every pair with the checkpoint and normalize the vectors.
/// Snippets that fail tree construction are skipped and counted.
pub fn build_index(checkpoint: &Checkpoint, pairs: &[CodeQueryPair]) -> Result<SearchIndex> {
    let dim = checkpoint.params.dim();
    let mut vectors = Vec::new();
    let mut refs = Vec::new();
    let mut skipped = 0usize;
    for pair in pairs {
        let Some(vector) = pipeline::encode_snippet(checkpoint, pair)? else {
            skipped += 1;
            continue;
        };
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &vector {
            let unit = if norm == 0.0 { 0.0 } else { v / norm };
            vectors.push(unit as f32);
        }
        refs.push(SnippetRef {
            id: pair.id.clone(),
            lang: pair.lang.clone(),
            preview: preview_of(&pair.code),
        });
    }
    Ok(SearchIndex {
        dim,
        vectors,
        refs,
        skipped,
    })
}

/// Rank index entries by cosine similarity to the query text, descending,
/// ties broken by ascending snippet id. Zero-vector snippets come after
/// every nonzero match with similarity 0.
pub fn query(
    index: &SearchIndex,
    checkpoint: &Checkpoint,
    text: &str,
    k: usize,
) -> Result<Vec<(SnippetRef, f64)>> {
    let qvec = pipeline::encode_query(checkpoint, text)?;
    rank_by_vector(index, &qvec, k)
}

/// Rank against an already-encoded query vector.
pub fn rank_by_vector(
    index: &SearchIndex,
    qvec: &[f64],
    k: usize,
) -> Result<Vec<(SnippetRef, f64)>> {
    if index.is_empty() {
        return Ok(Vec::new());
    }
    if qvec.len() != index.dim {
        return Err(Error::DimensionMismatch {
            expected: index.dim,
            got: qvec.len(),
        });
    }
    let qnorm = qvec.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut scored: Vec<(usize, bool, f64)> = (0..index.len())
        .map(|i| {
            let row = index.row(i);
            let zero_row = row.iter().all(|&v| v == 0.0);
            let score = if zero_row || qnorm == 0.0 {
                0.0
            } else {
                let dot: f64 = row.iter().zip(qvec).map(|(&r, &q)| r as f64 * q).sum();
                (dot / qnorm).clamp(-1.0, 1.0)
            };
            (i, zero_row, score)
        })
        .collect();
    scored.sort_by(|a, b| {
        a.1.cmp(&b.1)
            .then_with(|| b.2.partial_cmp(&a.2).expect("scores are finite"))
            .then_with(|| index.refs[a.0].id.cmp(&index.refs[b.0].id))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(i, _, score)| (index.refs[i].clone(), score))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    count: usize,
    dim: usize,
    skipped: usize,
    refs: Vec<SnippetRef>,
}

/// Persist the index with its checkpoint so a search needs only one file.
pub fn save_index(path: impl AsRef<Path>, index: &SearchIndex, checkpoint: &Checkpoint) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path.as_ref())?);
    writer.write_all(MAGIC)?;
    let header = IndexHeader {
        count: index.len(),
        dim: index.dim,
        skipped: index.skipped,
        refs: index.refs.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    writer.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    writer.write_all(&header_bytes)?;

    let mut ckpt_bytes = Vec::new();
    checkpoint.save(&mut ckpt_bytes)?;
    writer.write_all(&(ckpt_bytes.len() as u64).to_le_bytes())?;
    writer.write_all(&ckpt_bytes)?;

    for &v in &index.vectors {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Load an index and its embedded checkpoint.
pub fn load_index(path: impl AsRef<Path>) -> Result<(SearchIndex, Checkpoint)> {
    let mut reader = BufReader::new(File::open(path.as_ref())?);
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::IndexFile("bad magic; not an index file".into()));
    }
    let mut len4 = [0u8; 4];
    reader.read_exact(&mut len4)?;
    let mut header_bytes = vec![0u8; u32::from_le_bytes(len4) as usize];
    reader.read_exact(&mut header_bytes)?;
    let header: IndexHeader = serde_json::from_slice(&header_bytes)?;

    let mut len8 = [0u8; 8];
    reader.read_exact(&mut len8)?;
    let mut ckpt_bytes = vec![0u8; u64::from_le_bytes(len8) as usize];
    reader.read_exact(&mut ckpt_bytes)?;
    let checkpoint = Checkpoint::load(&mut ckpt_bytes.as_slice())?;

    let mut matrix_bytes = vec![0u8; header.count * header.dim * 4];
    reader.read_exact(&mut matrix_bytes)?;
    let vectors: Vec<f32> = matrix_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    Ok((
        SearchIndex {
            dim: header.dim,
            vectors,
            refs: header.refs,
            skipped: header.skipped,
        },
        checkpoint,
    ))
}
