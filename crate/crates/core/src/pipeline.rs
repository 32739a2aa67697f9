//! Glue between the corpus, tree, and model layers: building trees for
//! snippets, turning trees into token sequences, and encoding snippets or
//! queries with a trained checkpoint.

use crate::ast::{parse_minilang, SstTree};
use crate::corpus::{tokenize_text, CodeQueryPair};
use crate::error::Result;
use crate::model::{encode, fuse, Checkpoint};
use crate::seed;
use crate::serialize::{
    leaf_paths, lcrs_serialize, root_paths, sbt_serialize, CoverageFootprint, Method,
    SamplerConfig, SerializedSeq,
};
use crate::sst::{to_sst, TransformRuleSet};

/// Separator token between sampled paths when a snippet's paths are
/// written or fed to an encoder as one sequence.
pub const PATH_SEPARATOR: &str = ";";

/// Build the SST for a pair: a pre-parsed tree when present, otherwise the
/// code is parsed as MiniLang.
pub fn snippet_tree(pair: &CodeQueryPair, rules: &TransformRuleSet) -> Result<SstTree> {
    let ast = match &pair.ast {
        Some(tree) => tree.clone(),
        None => parse_minilang(&pair.code)?,
    };
    to_sst(&ast, rules)
}

/// All serialized sequences of one tree under one method. Sampling-based
/// methods use `item_seed` so corpus runs are order-independent.
pub fn tree_sequences(
    sst: &SstTree,
    method: Method,
    sampler: &SamplerConfig,
    item_seed: u64,
) -> Vec<SerializedSeq> {
    let cfg = SamplerConfig {
        seed: item_seed,
        ..*sampler
    };
    match method {
        Method::RootPath => root_paths(sst, &cfg),
        Method::LeafPath => leaf_paths(sst, &cfg),
        Method::Sbt => vec![sbt_serialize(sst)],
        Method::Lcrs => vec![lcrs_serialize(sst)],
    }
}

/// Flatten a snippet's sequences into one token stream, separating sampled
/// paths with [`PATH_SEPARATOR`].
pub fn flatten_sequences(seqs: &[SerializedSeq]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, seq) in seqs.iter().enumerate() {
        if i > 0 {
            out.push(PATH_SEPARATOR.to_string());
        }
        out.extend(seq.tokens.iter().cloned());
    }
    out
}

/// Tree token stream for a pair, with the per-item seed derived from the
/// sampler seed and the pair id.
pub fn pair_tree_tokens(
    pair: &CodeQueryPair,
    method: Method,
    sampler: &SamplerConfig,
    rules: &TransformRuleSet,
) -> Result<Vec<String>> {
    let sst = snippet_tree(pair, rules)?;
    let seqs = tree_sequences(&sst, method, sampler, seed::item(sampler.seed, &pair.id));
    Ok(flatten_sequences(&seqs))
}

/// Footprints of a pair's sequences under one method, plus the SST they
/// reference.
pub fn pair_footprints(
    pair: &CodeQueryPair,
    method: Method,
    sampler: &SamplerConfig,
    rules: &TransformRuleSet,
) -> Result<(Vec<CoverageFootprint>, SstTree)> {
    let sst = snippet_tree(pair, rules)?;
    let seqs = tree_sequences(&sst, method, sampler, seed::item(sampler.seed, &pair.id));
    Ok((seqs.into_iter().map(|s| s.footprint).collect(), sst))
}

/// Encode one snippet under the checkpoint's mode. Returns `None` when a
/// tree-based mode cannot build the snippet's tree.
pub fn encode_snippet(checkpoint: &Checkpoint, pair: &CodeQueryPair) -> Result<Option<Vec<f64>>> {
    let mode = checkpoint.mode;
    let tree_vec = match mode.method() {
        Some(method) => {
            let tokens =
                match pair_tree_tokens(pair, method, &checkpoint.sampler, &checkpoint.rules) {
                    Ok(tokens) => tokens,
                    Err(_) => return Ok(None),
                };
            Some(encode(
                &checkpoint.params.tree,
                &checkpoint.tree_vocab.encode(&tokens),
            )?)
        }
        None => None,
    };
    let code_vec = if mode.uses_code_tokens() {
        let tokens = tokenize_text(&pair.code);
        Some(encode(
            &checkpoint.params.code,
            &checkpoint.code_vocab.encode(&tokens),
        )?)
    } else {
        None
    };
    let vector = match (code_vec, tree_vec) {
        (Some(c), Some(t)) => fuse(&c, &t)?,
        (Some(c), None) => c,
        (None, Some(t)) => t,
        (None, None) => unreachable!("every mode uses at least one modality"),
    };
    Ok(Some(vector))
}

/// Encode a natural-language query with the checkpoint's query encoder.
pub fn encode_query(checkpoint: &Checkpoint, text: &str) -> Result<Vec<f64>> {
    let tokens = tokenize_text(text);
    encode(
        &checkpoint.params.query,
        &checkpoint.query_vocab.encode(&tokens),
    )
}

/// Cosine score matrices over a pair list, batched by the checkpoint's
/// batch size. Pairs whose snippet cannot be encoded are skipped and
/// counted; batches smaller than 2 are dropped. Returns the matrices, the
/// skip count, and the largest batch size used.
pub fn eval_batches(
    checkpoint: &Checkpoint,
    pairs: &[&CodeQueryPair],
) -> Result<(Vec<crate::model::Tensor>, usize, usize)> {
    use crate::model::Tensor;

    let mut snippet_vecs = Vec::new();
    let mut query_vecs = Vec::new();
    let mut skipped = 0usize;
    for pair in pairs {
        match encode_snippet(checkpoint, pair)? {
            Some(vector) => {
                snippet_vecs.push(vector);
                query_vecs.push(encode_query(checkpoint, &pair.query)?);
            }
            None => skipped += 1,
        }
    }

    let batch = checkpoint.config.batch_size;
    let mut matrices = Vec::new();
    let mut largest = 0usize;
    let mut at = 0;
    while at < snippet_vecs.len() {
        let end = (at + batch).min(snippet_vecs.len());
        if end - at >= 2 {
            let snippets = Tensor::from_rows(&snippet_vecs[at..end]);
            let queries = Tensor::from_rows(&query_vecs[at..end]);
            matrices.push(crate::eval::cosine_score_matrix(&snippets, &queries));
            largest = largest.max(end - at);
        }
        at = end;
    }
    Ok((matrices, skipped, largest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(id: &str, code: &str) -> CodeQueryPair {
        CodeQueryPair {
            id: id.into(),
            lang: "minilang".into(),
            code: code.into(),
            query: "a query".into(),
            ast: None,
            split: None,
        }
    }

    #[test]
    fn tree_tokens_are_deterministic_per_item() {
        let p = pair("p1", "def f(a, b): { for x in a: { g(x, b) } }");
        let sampler = SamplerConfig::default();
        let rules = TransformRuleSet::minilang_defaults();
        let a = pair_tree_tokens(&p, Method::RootPath, &sampler, &rules).unwrap();
        let b = pair_tree_tokens(&p, Method::RootPath, &sampler, &rules).unwrap();
        assert_eq!(a, b);

        // with more candidates than n_paths, the sampled subset depends on
        // the pair id
        let params: Vec<String> = (0..30).map(|i| format!("arg{i}")).collect();
        let big = pair("p1", &format!("def fn0({}): {{ return arg0 }}", params.join(", ")));
        let sampled_a = pair_tree_tokens(&big, Method::RootPath, &sampler, &rules).unwrap();
        let mut big_b = big.clone();
        big_b.id = "q9".into();
        let sampled_b = pair_tree_tokens(&big_b, Method::RootPath, &sampler, &rules).unwrap();
        assert_ne!(sampled_a, sampled_b);
    }

    #[test]
    fn flatten_joins_with_separator() {
        let p = pair("p", "def f(ab, cd): { return ab }");
        let sst = snippet_tree(&p, &TransformRuleSet::minilang_defaults()).unwrap();
        let seqs = tree_sequences(&sst, Method::RootPath, &SamplerConfig::default(), 1);
        assert!(seqs.len() > 1);
        let flat = flatten_sequences(&seqs);
        assert_eq!(
            flat.iter().filter(|t| *t == PATH_SEPARATOR).count(),
            seqs.len() - 1
        );
    }

    #[test]
    fn snippet_tree_prefers_preparsed_ast() {
        let mut p = pair("p", "not valid minilang ===");
        p.ast = Some(parse_minilang("x = 1").unwrap());
        assert!(snippet_tree(&p, &TransformRuleSet::identity()).is_ok());
    }
}
