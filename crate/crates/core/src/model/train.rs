//! Training loop: epoch shuffling, batched forward/backward, adaptive
//! moment updates, and per-epoch validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize_text, CodeQueryPair, CorpusSplit, Split};
use crate::error::{Error, Result};
use crate::eval;
use crate::model::encoder::{backward, forward, EncodeCache};
use crate::model::gradcheck::TrainingBatch;
use crate::model::loss::batch_loss_and_grads;
use crate::model::optim::Adam;
use crate::model::tensor::Tensor;
use crate::model::vocab::Vocabulary;
use crate::model::{init_model, Checkpoint, Mode, ModelParams, TrainConfig};
use crate::pipeline;
use crate::seed;
use crate::serialize::SamplerConfig;
use crate::sst::TransformRuleSet;

/// Loss (and retrieval quality) after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub valid_mrr: Option<f64>,
}

/// A trained checkpoint plus its training history.
#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
    /// Train/valid pairs dropped because their tree could not be built.
    pub skipped_train: usize,
    pub skipped_valid: usize,
    /// Sequences cut to the maximum length during training.
    pub truncated_sequences: u64,
}

struct Item {
    code_ids: Option<Vec<u32>>,
    tree_ids: Option<Vec<u32>>,
    query_ids: Vec<u32>,
}

struct PreparedTokens {
    code: Option<Vec<String>>,
    tree: Option<Vec<String>>,
    query: Vec<String>,
}

fn prepare_tokens(
    pair: &CodeQueryPair,
    mode: Mode,
    sampler: &SamplerConfig,
    rules: &TransformRuleSet,
) -> Option<PreparedTokens> {
    let tree = if let Some(method) = mode.method() {
        match pipeline::pair_tree_tokens(pair, method, sampler, rules) {
            Ok(tokens) => Some(tokens),
            Err(_) => return None,
        }
    } else {
        None
    };
    let code = mode
        .uses_code_tokens()
        .then(|| tokenize_text(&pair.code));
    Some(PreparedTokens {
        code,
        tree,
        query: tokenize_text(&pair.query),
    })
}

/// Train encoders for `mode` on the train split, validating per epoch.
///
/// Deterministic under `cfg.seed`: the same inputs produce a bit-identical
/// checkpoint.
pub fn train(
    pairs: &[CodeQueryPair],
    split: &CorpusSplit,
    mode: Mode,
    cfg: &TrainConfig,
    sampler: &SamplerConfig,
    rules: &TransformRuleSet,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    sampler.validate()?;
    rules.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptySplit);
    }

    let prepare_all = |which: Split| -> (Vec<PreparedTokens>, usize) {
        let mut out = Vec::new();
        let mut skipped = 0;
        for pair in split.subset(pairs, which) {
            match prepare_tokens(pair, mode, sampler, rules) {
                Some(p) => out.push(p),
                None => skipped += 1,
            }
        }
        (out, skipped)
    };
    let (train_tokens, skipped_train) = prepare_all(Split::Train);
    let (valid_tokens, skipped_valid) = prepare_all(Split::Valid);
    if train_tokens.is_empty() {
        return Err(Error::EmptySplit);
    }

    let build_vocab = |select: fn(&PreparedTokens) -> Option<&[String]>| -> Vocabulary {
        let streams: Vec<&[String]> = train_tokens.iter().filter_map(select).collect();
        if streams.is_empty() {
            Vocabulary::reserved_only()
        } else {
            Vocabulary::build(streams, cfg.vocab_cap, cfg.min_token_count)
        }
    };
    let code_vocab = build_vocab(|p| p.code.as_deref());
    let tree_vocab = build_vocab(|p| p.tree.as_deref());
    let query_vocab = build_vocab(|p| Some(&p.query));

    let encode_items = |tokens: &[PreparedTokens]| -> Vec<Item> {
        tokens
            .iter()
            .map(|p| Item {
                code_ids: p.code.as_ref().map(|t| code_vocab.encode(t)),
                tree_ids: p.tree.as_ref().map(|t| tree_vocab.encode(t)),
                query_ids: query_vocab.encode(&p.query),
            })
            .collect()
    };
    let train_items = encode_items(&train_tokens);
    let valid_items = encode_items(&valid_tokens);

    let mut params = init_model(cfg, code_vocab.len(), tree_vocab.len(), query_vocab.len());
    let block_lens: Vec<usize> = params.blocks().iter().map(|(_, t)| t.len()).collect();
    let mut adam = Adam::new(cfg.learning_rate, &block_lens);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut truncated_sequences = 0u64;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_items.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &format!("epoch.{epoch}")));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let batch = gather(&train_items, chunk);
            let (loss, grads, truncated) = batch_backward(&params, &batch)?;
            truncated_sequences += truncated;
            let grad_blocks = grads.blocks();
            let grad_refs: Vec<&Tensor> = grad_blocks.iter().map(|(_, t)| *t).collect();
            let mut param_blocks = params.blocks_mut();
            let mut param_refs: Vec<&mut Tensor> =
                param_blocks.iter_mut().map(|(_, t)| &mut **t).collect();
            adam.step(&mut param_refs, &grad_refs);
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        if seen == 0 {
            return Err(Error::BatchTooSmall { got: train_items.len() });
        }
        let train_loss = loss_sum / seen as f64;

        let (valid_loss, valid_mrr) = evaluate_split(&params, &valid_items, cfg.batch_size)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            valid_loss,
            valid_mrr,
        });
    }

    let checkpoint = Checkpoint {
        version: Checkpoint::VERSION,
        mode,
        config: *cfg,
        sampler: *sampler,
        rules: rules.clone(),
        code_vocab,
        tree_vocab,
        query_vocab,
        params,
    };
    Ok(TrainOutcome {
        checkpoint,
        history,
        skipped_train,
        skipped_valid,
        truncated_sequences,
    })
}

fn gather(items: &[Item], chunk: &[usize]) -> TrainingBatch {
    let code: Option<Vec<Vec<u32>>> = items[chunk[0]].code_ids.as_ref().map(|_| {
        chunk
            .iter()
            .map(|&i| items[i].code_ids.clone().expect("uniform item shape"))
            .collect()
    });
    let tree: Option<Vec<Vec<u32>>> = items[chunk[0]].tree_ids.as_ref().map(|_| {
        chunk
            .iter()
            .map(|&i| items[i].tree_ids.clone().expect("uniform item shape"))
            .collect()
    });
    TrainingBatch {
        code_ids: code,
        tree_ids: tree,
        query_ids: chunk.iter().map(|&i| items[i].query_ids.clone()).collect(),
    }
}

/// Forward pass over a batch: snippet vectors (fused when both modalities
/// are present), query vectors, and the caches needed for backprop.
struct BatchForward {
    snippets: Tensor,
    queries: Tensor,
    code_caches: Vec<EncodeCache>,
    tree_caches: Vec<EncodeCache>,
    query_caches: Vec<EncodeCache>,
    truncated: u64,
}

fn batch_forward(params: &ModelParams, batch: &TrainingBatch) -> Result<BatchForward> {
    batch.validate()?;
    let n = batch.len();
    let d = params.dim();
    let mut snippets = Tensor::zeros(n, d);
    let mut queries = Tensor::zeros(n, d);
    let mut code_caches = Vec::with_capacity(n);
    let mut tree_caches = Vec::with_capacity(n);
    let mut query_caches = Vec::with_capacity(n);
    let mut truncated = 0u64;

    for i in 0..n {
        let mut vec_sum = vec![0.0; d];
        if let Some(code_ids) = &batch.code_ids {
            let enc = forward(&params.code, &code_ids[i])?;
            for (s, v) in vec_sum.iter_mut().zip(&enc.vector) {
                *s += v;
            }
            truncated += enc.truncated as u64;
            code_caches.push(enc.cache);
        }
        if let Some(tree_ids) = &batch.tree_ids {
            let enc = forward(&params.tree, &tree_ids[i])?;
            for (s, v) in vec_sum.iter_mut().zip(&enc.vector) {
                *s += v;
            }
            truncated += enc.truncated as u64;
            tree_caches.push(enc.cache);
        }
        snippets.row_mut(i).copy_from_slice(&vec_sum);

        let enc = forward(&params.query, &batch.query_ids[i])?;
        queries.row_mut(i).copy_from_slice(&enc.vector);
        truncated += enc.truncated as u64;
        query_caches.push(enc.cache);
    }
    Ok(BatchForward {
        snippets,
        queries,
        code_caches,
        tree_caches,
        query_caches,
        truncated,
    })
}

/// Loss only; used by validation and the gradient checker.
pub(crate) fn batch_loss_value(params: &ModelParams, batch: &TrainingBatch) -> Result<f64> {
    let fwd = batch_forward(params, batch)?;
    let (loss, _, _) = batch_loss_and_grads(&fwd.snippets, &fwd.queries)?;
    Ok(loss)
}

/// Loss, full parameter gradients, and the truncation count for a batch.
pub(crate) fn batch_backward(
    params: &ModelParams,
    batch: &TrainingBatch,
) -> Result<(f64, ModelParams, u64)> {
    let fwd = batch_forward(params, batch)?;
    let (loss, dsnippets, dqueries) = batch_loss_and_grads(&fwd.snippets, &fwd.queries)?;
    let mut grads = params.zeros_like();
    for i in 0..batch.len() {
        // fusion is a plain sum, so both modalities receive the same row
        if let Some(cache) = fwd.code_caches.get(i) {
            backward(&params.code, cache, dsnippets.row(i), &mut grads.code);
        }
        if let Some(cache) = fwd.tree_caches.get(i) {
            backward(&params.tree, cache, dsnippets.row(i), &mut grads.tree);
        }
        backward(&params.query, &fwd.query_caches[i], dqueries.row(i), &mut grads.query);
    }
    Ok((loss, grads, fwd.truncated))
}

/// Mean loss and cosine MRR over a held-out item list, batched.
fn evaluate_split(
    params: &ModelParams,
    items: &[Item],
    batch_size: usize,
) -> Result<(Option<f64>, Option<f64>)> {
    let order: Vec<usize> = (0..items.len()).collect();
    let mut loss_sum = 0.0;
    let mut seen = 0usize;
    let mut matrices = Vec::new();
    for chunk in order.chunks(batch_size) {
        if chunk.len() < 2 {
            continue;
        }
        let batch = gather(items, chunk);
        let fwd = batch_forward(params, &batch)?;
        let (loss, _, _) = batch_loss_and_grads(&fwd.snippets, &fwd.queries)?;
        loss_sum += loss * chunk.len() as f64;
        seen += chunk.len();
        matrices.push(eval::cosine_score_matrix(&fwd.snippets, &fwd.queries));
    }
    if seen == 0 {
        return Ok((None, None));
    }
    let mrr = eval::mrr(&matrices)?;
    Ok((Some(loss_sum / seen as f64), Some(mrr)))
}
