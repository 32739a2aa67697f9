//! Semantic code search over simplified semantic trees.
//!
//! The pipeline: parse code into an AST ([`ast`]), simplify it into an SST
//! with rule-driven prune/relabel/unify passes ([`sst`]), serialize the
//! tree into token sequences with exact coverage footprints
//! ([`serialize`], [`coverage`]), train unimodal or multimodal encoders
//! with an in-batch contrastive loss ([`model`]), and answer
//! natural-language queries by cosine ranking ([`search`]) with MRR/NDCG
//! reporting ([`eval`]).

pub mod ast;
pub mod corpus;
pub mod coverage;
pub mod error;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod search;
pub mod seed;
pub mod serialize;
pub mod sst;
pub mod treegen;

pub use ast::{load_ast, parse_minilang, tree_stats, AstTree, NodeKind, SstTree, Tree, TreeStats};
pub use corpus::{
    load_corpus, save_corpus, split_corpus, tokenize_text, CodeQueryPair, CorpusSplit, Split,
};
pub use coverage::{corpus_coverage, coverage, token_footprint, CoverageReport, CoverageSummary};
pub use error::{Error, Result};
pub use eval::{compare, mrr, ndcg, EvalReport, ModeReport};
pub use model::{
    batch_loss, encode_nbow, encode_selfatt, fuse, grad_check, train, Checkpoint, EncoderKind,
    EncoderParams, Mode, ModelParams, TrainConfig, TrainOutcome, Vocabulary,
};
pub use search::{build_index, load_index, query, save_index, SearchIndex, SnippetRef};
pub use serialize::{
    lcrs_deserialize, lcrs_inverse, lcrs_serialize, lcrs_transform, leaf_paths, root_paths,
    sbt_deserialize, sbt_serialize, BinaryTree, CoverageFootprint, Method, SamplerConfig,
    SerializedSeq,
};
pub use sst::{load_rules, parse_rules, to_sst, TransformRuleSet};
