//! Encoders, the in-batch contrastive loss, multimodal fusion, training,
//! and checkpoints.

mod checkpoint;
mod encoder;
mod gradcheck;
mod loss;
mod optim;
mod tensor;
mod train;
mod vocab;

pub use checkpoint::Checkpoint;
pub use encoder::{
    encode, encode_nbow, encode_selfatt, EncoderKind, EncoderParams, SelfAttParams,
    ATTENTION_HEADS,
};
pub use gradcheck::{grad_check, TrainingBatch};
pub use loss::{batch_loss, batch_loss_and_grads, fuse};
pub use optim::Adam;
pub use tensor::{dot as dot_product, Tensor};
pub use train::{train, EpochStats, TrainOutcome};
pub use vocab::{Vocabulary, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::serialize::Method;

/// Training/retrieval mode: which modalities feed the snippet side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    UniCode,
    Uni(Method),
    Multi(Method),
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::UniCode,
        Mode::Uni(Method::RootPath),
        Mode::Uni(Method::LeafPath),
        Mode::Uni(Method::Sbt),
        Mode::Uni(Method::Lcrs),
        Mode::Multi(Method::RootPath),
        Mode::Multi(Method::LeafPath),
        Mode::Multi(Method::Sbt),
        Mode::Multi(Method::Lcrs),
    ];

    pub fn method(&self) -> Option<Method> {
        match self {
            Mode::UniCode => None,
            Mode::Uni(m) | Mode::Multi(m) => Some(*m),
        }
    }

    pub fn uses_code_tokens(&self) -> bool {
        matches!(self, Mode::UniCode | Mode::Multi(_))
    }

    pub fn uses_tree_tokens(&self) -> bool {
        self.method().is_some()
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::UniCode => f.write_str("uni-code"),
            Mode::Uni(m) => write!(f, "uni-{m}"),
            Mode::Multi(m) => write!(f, "multi-{m}"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uni-code" {
            return Ok(Mode::UniCode);
        }
        if let Some(rest) = s.strip_prefix("uni-") {
            return Ok(Mode::Uni(rest.parse().map_err(|_| Error::UnknownMode(s.into()))?));
        }
        if let Some(rest) = s.strip_prefix("multi-") {
            return Ok(Mode::Multi(rest.parse().map_err(|_| Error::UnknownMode(s.into()))?));
        }
        Err(Error::UnknownMode(s.to_string()))
    }
}

impl Serialize for Mode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Training hyperparameters. Desk-scale defaults; the embedding size
/// follows the reference setting of 128.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub max_seq_len: usize,
    pub vocab_cap: usize,
    pub min_token_count: usize,
    pub encoder: EncoderKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            embedding_dim: 128,
            learning_rate: 1e-3,
            epochs: 10,
            seed: 0,
            max_seq_len: 200,
            vocab_cap: 10_000,
            min_token_count: 2,
            encoder: EncoderKind::Nbow,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig(
                "batch_size must be at least 2; the loss needs distractors".into(),
            ));
        }
        if self.embedding_dim < 1 {
            return Err(Error::InvalidConfig("embedding_dim must be >= 1".into()));
        }
        if self.encoder == EncoderKind::SelfAtt && self.embedding_dim % ATTENTION_HEADS != 0 {
            return Err(Error::InvalidConfig(format!(
                "embedding_dim must be divisible by {ATTENTION_HEADS} for the selfatt encoder"
            )));
        }
        if self.max_seq_len < 1 {
            return Err(Error::InvalidConfig("max_seq_len must be >= 1".into()));
        }
        Ok(())
    }
}

/// The three encoders of the pseudo-siamese model. All share the embedding
/// dimension; encoders unused by the current mode stay at their
/// initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub code: EncoderParams,
    pub tree: EncoderParams,
    pub query: EncoderParams,
}

impl ModelParams {
    pub fn dim(&self) -> usize {
        self.code.dim()
    }

    /// All parameter blocks, prefixed by modality, in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (name, enc) in [("code", &self.code), ("tree", &self.tree), ("query", &self.query)] {
            for (block, tensor) in enc.blocks() {
                out.push((format!("{name}.{block}"), tensor));
            }
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (name, enc) in [
            ("code", &mut self.code),
            ("tree", &mut self.tree),
            ("query", &mut self.query),
        ] {
            for (block, tensor) in enc.blocks_mut() {
                out.push((format!("{name}.{block}"), tensor));
            }
        }
        out
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            code: self.code.zeros_like(),
            tree: self.tree.zeros_like(),
            query: self.query.zeros_like(),
        }
    }
}

/// Initialize one encoder. Every block draws from its own seed stream, so
/// layouts stay reproducible when other blocks change size.
pub fn init_encoder(
    kind: EncoderKind,
    vocab_size: usize,
    cfg: &TrainConfig,
    name: &str,
) -> EncoderParams {
    let d = cfg.embedding_dim;
    let uniform = |label: String, rows: usize, cols: usize, bound: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &label));
        Tensor::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
    };
    let xavier = |label: String, rows: usize, cols: usize| {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        uniform(label, rows, cols, bound)
    };
    let embedding = uniform(format!("init.{name}.embedding"), vocab_size, d, 0.1);
    let attn = match kind {
        EncoderKind::Nbow => None,
        EncoderKind::SelfAtt => Some(SelfAttParams {
            positional: uniform(format!("init.{name}.positional"), cfg.max_seq_len, d, 0.1),
            wq: xavier(format!("init.{name}.wq"), d, d),
            wk: xavier(format!("init.{name}.wk"), d, d),
            wv: xavier(format!("init.{name}.wv"), d, d),
            wo: xavier(format!("init.{name}.wo"), d, d),
            ff1: xavier(format!("init.{name}.ff1"), d, d),
            ff1_bias: Tensor::zeros(1, d),
            ff2: xavier(format!("init.{name}.ff2"), d, d),
            ff2_bias: Tensor::zeros(1, d),
        }),
    };
    EncoderParams {
        kind,
        embedding,
        attn,
    }
}

/// Initialize all three encoders for the given vocabulary sizes.
pub fn init_model(
    cfg: &TrainConfig,
    code_vocab: usize,
    tree_vocab: usize,
    query_vocab: usize,
) -> ModelParams {
    ModelParams {
        code: init_encoder(cfg.encoder, code_vocab, cfg, "code"),
        tree: init_encoder(cfg.encoder, tree_vocab, cfg, "tree"),
        query: init_encoder(cfg.encoder, query_vocab, cfg, "query"),
    }
}
