//! Checkpoint persistence.
//!
//! Layout: an 8-byte magic, a JSON header (version, mode, configuration,
//! rules, vocabularies), then named parameter blocks of little-endian
//! 32-bit floats, row-major, each prefixed by its name and shape. Loading
//! validates shapes against the vocabularies.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::encoder::{EncoderKind, EncoderParams, SelfAttParams};
use crate::model::tensor::Tensor;
use crate::model::vocab::Vocabulary;
use crate::model::{Mode, ModelParams, TrainConfig};
use crate::serialize::SamplerConfig;
use crate::sst::TransformRuleSet;

const MAGIC: &[u8; 8] = b"SSTCKPT1";

/// A trained model: configuration, vocabularies, and parameters for the
/// code, tree, and query encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub mode: Mode,
    pub config: TrainConfig,
    pub sampler: SamplerConfig,
    pub rules: TransformRuleSet,
    pub code_vocab: Vocabulary,
    pub tree_vocab: Vocabulary,
    pub query_vocab: Vocabulary,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    mode: Mode,
    config: TrainConfig,
    sampler: SamplerConfig,
    rules: TransformRuleSet,
    code_vocab: Vec<String>,
    tree_vocab: Vec<String>,
    query_vocab: Vec<String>,
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn save_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = BufWriter::new(File::create(path.as_ref())?);
        self.save(&mut writer)?;
        writer.flush()?;
        Ok(())
    }

    pub fn save(&self, writer: &mut impl Write) -> Result<()> {
        writer.write_all(MAGIC)?;
        let header = Header {
            version: self.version,
            mode: self.mode,
            config: self.config,
            sampler: self.sampler,
            rules: self.rules.clone(),
            code_vocab: self.code_vocab.tokens().to_vec(),
            tree_vocab: self.tree_vocab.tokens().to_vec(),
            query_vocab: self.query_vocab.tokens().to_vec(),
        };
        let header_bytes = serde_json::to_vec(&header)?;
        writer.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
        writer.write_all(&header_bytes)?;

        let blocks = self.params.blocks();
        writer.write_all(&(blocks.len() as u32).to_le_bytes())?;
        for (name, tensor) in blocks {
            writer.write_all(&(name.len() as u32).to_le_bytes())?;
            writer.write_all(name.as_bytes())?;
            writer.write_all(&(tensor.rows() as u32).to_le_bytes())?;
            writer.write_all(&(tensor.cols() as u32).to_le_bytes())?;
            for &v in tensor.data() {
                writer.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load_from(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let mut reader = BufReader::new(File::open(path.as_ref())?);
        Self::load(&mut reader)
    }

    pub fn load(reader: &mut impl Read) -> Result<Checkpoint> {
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
        }
        let header_len = read_u32(reader)? as usize;
        let mut header_bytes = vec![0u8; header_len];
        reader.read_exact(&mut header_bytes)?;
        let header: Header = serde_json::from_slice(&header_bytes)?;
        if header.version != Self::VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                header.version
            )));
        }

        let block_count = read_u32(reader)? as usize;
        let mut blocks: BTreeMap<String, Tensor> = BTreeMap::new();
        for _ in 0..block_count {
            let name_len = read_u32(reader)? as usize;
            let mut name = vec![0u8; name_len];
            reader.read_exact(&mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Checkpoint("block name is not utf-8".into()))?;
            let rows = read_u32(reader)? as usize;
            let cols = read_u32(reader)? as usize;
            let mut data = vec![0u8; rows * cols * 4];
            reader.read_exact(&mut data)?;
            let tensor = Tensor::from_fn(rows, cols, |r, c| {
                let at = (r * cols + c) * 4;
                f32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]]) as f64
            });
            if blocks.insert(name.clone(), tensor).is_some() {
                return Err(Error::Checkpoint(format!("duplicate block \"{name}\"")));
            }
        }

        let code_vocab = Vocabulary::from_tokens(header.code_vocab)?;
        let tree_vocab = Vocabulary::from_tokens(header.tree_vocab)?;
        let query_vocab = Vocabulary::from_tokens(header.query_vocab)?;

        let kind = header.config.encoder;
        let params = ModelParams {
            code: assemble_encoder(&mut blocks, "code", kind, &header.config, code_vocab.len())?,
            tree: assemble_encoder(&mut blocks, "tree", kind, &header.config, tree_vocab.len())?,
            query: assemble_encoder(&mut blocks, "query", kind, &header.config, query_vocab.len())?,
        };
        if let Some(extra) = blocks.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected block \"{extra}\"")));
        }

        Ok(Checkpoint {
            version: header.version,
            mode: header.mode,
            config: header.config,
            sampler: header.sampler,
            rules: header.rules,
            code_vocab,
            tree_vocab,
            query_vocab,
            params,
        })
    }
}

fn read_u32(reader: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn take_block(
    blocks: &mut BTreeMap<String, Tensor>,
    name: String,
    rows: usize,
    cols: usize,
) -> Result<Tensor> {
    let tensor = blocks
        .remove(&name)
        .ok_or_else(|| Error::Checkpoint(format!("missing block \"{name}\"")))?;
    if tensor.rows() != rows || tensor.cols() != cols {
        return Err(Error::Checkpoint(format!(
            "block \"{name}\" has shape {}x{}, expected {rows}x{cols}",
            tensor.rows(),
            tensor.cols()
        )));
    }
    Ok(tensor)
}

fn assemble_encoder(
    blocks: &mut BTreeMap<String, Tensor>,
    modality: &str,
    kind: EncoderKind,
    config: &TrainConfig,
    vocab_size: usize,
) -> Result<EncoderParams> {
    let d = config.embedding_dim;
    let embedding = take_block(blocks, format!("{modality}.embedding"), vocab_size, d)?;
    let attn = match kind {
        EncoderKind::Nbow => None,
        EncoderKind::SelfAtt => Some(SelfAttParams {
            positional: take_block(blocks, format!("{modality}.positional"), config.max_seq_len, d)?,
            wq: take_block(blocks, format!("{modality}.wq"), d, d)?,
            wk: take_block(blocks, format!("{modality}.wk"), d, d)?,
            wv: take_block(blocks, format!("{modality}.wv"), d, d)?,
            wo: take_block(blocks, format!("{modality}.wo"), d, d)?,
            ff1: take_block(blocks, format!("{modality}.ff1"), d, d)?,
            ff1_bias: take_block(blocks, format!("{modality}.ff1_bias"), 1, d)?,
            ff2: take_block(blocks, format!("{modality}.ff2"), d, d)?,
            ff2_bias: take_block(blocks, format!("{modality}.ff2_bias"), 1, d)?,
        }),
    };
    Ok(EncoderParams {
        kind,
        embedding,
        attn,
    })
}
