//! Sequence encoders: neural bag-of-words and a single-layer two-head
//! self-attention encoder. Both map a token-id sequence to a d-vector and
//! support exact backpropagation for training and gradient checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::tensor::{dot, Tensor};
use crate::model::vocab::PAD_ID;

/// Attention heads in the self-attention encoder.
pub const ATTENTION_HEADS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Nbow,
    SelfAtt,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Nbow => "nbow",
            EncoderKind::SelfAtt => "selfatt",
        }
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nbow" => Ok(EncoderKind::Nbow),
            "selfatt" => Ok(EncoderKind::SelfAtt),
            other => Err(Error::InvalidConfig(format!("unknown encoder \"{other}\""))),
        }
    }
}

/// Self-attention specific parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttParams {
    pub positional: Tensor, // L x d
    pub wq: Tensor,         // d x d
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub ff1: Tensor, // d x d
    pub ff1_bias: Tensor, // 1 x d
    pub ff2: Tensor,
    pub ff2_bias: Tensor,
}

/// Parameters of one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub kind: EncoderKind,
    pub embedding: Tensor, // |V| x d
    pub attn: Option<SelfAttParams>,
}

impl EncoderParams {
    pub fn dim(&self) -> usize {
        self.embedding.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    /// Maximum sequence length the encoder accepts; longer inputs are
    /// truncated. NBoW has no positional table and accepts any length.
    pub fn max_len(&self) -> Option<usize> {
        self.attn.as_ref().map(|a| a.positional.rows())
    }

    /// Named parameter blocks in a fixed order.
    pub fn blocks(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out = vec![("embedding", &self.embedding)];
        if let Some(attn) = &self.attn {
            out.extend([
                ("positional", &attn.positional),
                ("wq", &attn.wq),
                ("wk", &attn.wk),
                ("wv", &attn.wv),
                ("wo", &attn.wo),
                ("ff1", &attn.ff1),
                ("ff1_bias", &attn.ff1_bias),
                ("ff2", &attn.ff2),
                ("ff2_bias", &attn.ff2_bias),
            ]);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out: Vec<(&'static str, &mut Tensor)> = vec![("embedding", &mut self.embedding)];
        if let Some(attn) = &mut self.attn {
            out.extend([
                ("positional", &mut attn.positional),
                ("wq", &mut attn.wq),
                ("wk", &mut attn.wk),
                ("wv", &mut attn.wv),
                ("wo", &mut attn.wo),
                ("ff1", &mut attn.ff1),
                ("ff1_bias", &mut attn.ff1_bias),
                ("ff2", &mut attn.ff2),
                ("ff2_bias", &mut attn.ff2_bias),
            ]);
        }
        out
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> EncoderParams {
        EncoderParams {
            kind: self.kind,
            embedding: Tensor::zeros(self.embedding.rows(), self.embedding.cols()),
            attn: self.attn.as_ref().map(|a| SelfAttParams {
                positional: Tensor::zeros(a.positional.rows(), a.positional.cols()),
                wq: Tensor::zeros(a.wq.rows(), a.wq.cols()),
                wk: Tensor::zeros(a.wk.rows(), a.wk.cols()),
                wv: Tensor::zeros(a.wv.rows(), a.wv.cols()),
                wo: Tensor::zeros(a.wo.rows(), a.wo.cols()),
                ff1: Tensor::zeros(a.ff1.rows(), a.ff1.cols()),
                ff1_bias: Tensor::zeros(1, a.ff1_bias.cols()),
                ff2: Tensor::zeros(a.ff2.rows(), a.ff2.cols()),
                ff2_bias: Tensor::zeros(1, a.ff2_bias.cols()),
            }),
        }
    }
}

/// Drop padding ids, validate the rest, and truncate to the encoder's
/// maximum length. Returns the active ids and whether truncation happened.
fn active_ids(params: &EncoderParams, ids: &[u32]) -> Result<(Vec<u32>, bool)> {
    let mut active = Vec::with_capacity(ids.len());
    for &id in ids {
        if id as usize >= params.vocab_size() {
            return Err(Error::TokenIdOutOfRange {
                id,
                size: params.vocab_size(),
            });
        }
        if id != PAD_ID {
            active.push(id);
        }
    }
    let truncated = match params.max_len() {
        Some(max) if active.len() > max => {
            active.truncate(max);
            true
        }
        _ => false,
    };
    Ok((active, truncated))
}

/// Forward-pass activations kept for backpropagation.
#[derive(Debug)]
pub(crate) enum EncodeCache {
    Empty,
    Nbow {
        ids: Vec<u32>,
    },
    SelfAtt {
        ids: Vec<u32>,
        x: Tensor,
        q: Tensor,
        k: Tensor,
        v: Tensor,
        attn: Vec<Tensor>, // per head, m x m
        concat: Tensor,
        y: Tensor,
        f1: Tensor,
        relu: Tensor,
    },
}

pub(crate) struct Encoded {
    pub vector: Vec<f64>,
    pub cache: EncodeCache,
    pub truncated: bool,
}

/// Mean of the embeddings of non-padding tokens; all-padding input gives
/// the zero vector.
pub fn encode_nbow(params: &EncoderParams, ids: &[u32]) -> Result<Vec<f64>> {
    forward_nbow(params, ids).map(|e| e.vector)
}

pub(crate) fn forward_nbow(params: &EncoderParams, ids: &[u32]) -> Result<Encoded> {
    let (active, truncated) = active_ids(params, ids)?;
    if active.is_empty() {
        return Ok(Encoded {
            vector: vec![0.0; params.dim()],
            cache: EncodeCache::Empty,
            truncated,
        });
    }
    let mut vector = vec![0.0; params.dim()];
    for &id in &active {
        for (o, &e) in vector.iter_mut().zip(params.embedding.row(id as usize)) {
            *o += e;
        }
    }
    let inv = 1.0 / active.len() as f64;
    for o in &mut vector {
        *o *= inv;
    }
    Ok(Encoded {
        vector,
        cache: EncodeCache::Nbow { ids: active },
        truncated,
    })
}

/// Token plus positional embeddings, one self-attention layer with
/// [`ATTENTION_HEADS`] heads, a feed-forward block, then mean pooling.
/// Sequences longer than the positional table are truncated.
pub fn encode_selfatt(params: &EncoderParams, ids: &[u32]) -> Result<Vec<f64>> {
    forward_selfatt(params, ids).map(|e| e.vector)
}

pub(crate) fn forward_selfatt(params: &EncoderParams, ids: &[u32]) -> Result<Encoded> {
    let attn = params.attn.as_ref().ok_or_else(|| {
        Error::InvalidConfig("self-attention encoder needs attention parameters".into())
    })?;
    let (active, truncated) = active_ids(params, ids)?;
    let d = params.dim();
    if active.is_empty() {
        return Ok(Encoded {
            vector: vec![0.0; d],
            cache: EncodeCache::Empty,
            truncated,
        });
    }
    let m = active.len();
    let dh = d / ATTENTION_HEADS;

    let x = Tensor::from_fn(m, d, |t, j| {
        params.embedding.get(active[t] as usize, j) + attn.positional.get(t, j)
    });
    let q = x.matmul(&attn.wq);
    let k = x.matmul(&attn.wk);
    let v = x.matmul(&attn.wv);

    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(ATTENTION_HEADS);
    let mut concat = Tensor::zeros(m, d);
    for h in 0..ATTENTION_HEADS {
        let off = h * dh;
        let mut a = Tensor::zeros(m, m);
        for t in 0..m {
            let qt = &q.row(t)[off..off + dh];
            let row = a.row_mut(t);
            let mut max = f64::NEG_INFINITY;
            for u in 0..m {
                let logit = dot(qt, &k.row(u)[off..off + dh]) * scale;
                row[u] = logit;
                max = max.max(logit);
            }
            let mut denom = 0.0;
            for item in row.iter_mut() {
                *item = (*item - max).exp();
                denom += *item;
            }
            for item in row.iter_mut() {
                *item /= denom;
            }
        }
        for t in 0..m {
            for u in 0..m {
                let w = a.get(t, u);
                if w == 0.0 {
                    continue;
                }
                let vu = &v.row(u)[off..off + dh];
                for (j, &val) in vu.iter().enumerate() {
                    let cur = concat.get(t, off + j);
                    concat.set(t, off + j, cur + w * val);
                }
            }
        }
        heads.push(a);
    }

    let y = concat.matmul(&attn.wo);
    let mut f1 = y.matmul(&attn.ff1);
    for t in 0..m {
        let bias = attn.ff1_bias.row(0);
        let row = f1.row_mut(t);
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
    let relu = Tensor::from_fn(m, d, |t, j| f1.get(t, j).max(0.0));
    let mut f2 = relu.matmul(&attn.ff2);
    for t in 0..m {
        let bias = attn.ff2_bias.row(0);
        let row = f2.row_mut(t);
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }

    let inv = 1.0 / m as f64;
    let mut vector = vec![0.0; d];
    for t in 0..m {
        for (o, &val) in vector.iter_mut().zip(f2.row(t)) {
            *o += val * inv;
        }
    }

    Ok(Encoded {
        vector,
        cache: EncodeCache::SelfAtt {
            ids: active,
            x,
            q,
            k,
            v,
            attn: heads,
            concat,
            y,
            f1,
            relu,
        },
        truncated,
    })
}

/// Dispatch on the encoder kind.
pub fn encode(params: &EncoderParams, ids: &[u32]) -> Result<Vec<f64>> {
    match params.kind {
        EncoderKind::Nbow => encode_nbow(params, ids),
        EncoderKind::SelfAtt => encode_selfatt(params, ids),
    }
}

pub(crate) fn forward(params: &EncoderParams, ids: &[u32]) -> Result<Encoded> {
    match params.kind {
        EncoderKind::Nbow => forward_nbow(params, ids),
        EncoderKind::SelfAtt => forward_selfatt(params, ids),
    }
}

/// Accumulate parameter gradients for one encoded sequence given the
/// gradient of the loss with respect to the output vector.
pub(crate) fn backward(
    params: &EncoderParams,
    cache: &EncodeCache,
    grad_out: &[f64],
    grads: &mut EncoderParams,
) {
    match cache {
        EncodeCache::Empty => {}
        EncodeCache::Nbow { ids } => {
            let inv = 1.0 / ids.len() as f64;
            for &id in ids {
                let row = grads.embedding.row_mut(id as usize);
                for (g, &go) in row.iter_mut().zip(grad_out) {
                    *g += go * inv;
                }
            }
        }
        EncodeCache::SelfAtt {
            ids,
            x,
            q,
            k,
            v,
            attn: heads,
            concat,
            y,
            f1,
            relu,
        } => {
            let attn = params.attn.as_ref().expect("cache implies attention params");
            let gattn = grads.attn.as_mut().expect("gradient shapes mirror params");
            let m = ids.len();
            let d = params.dim();
            let dh = d / ATTENTION_HEADS;
            let scale = 1.0 / (dh as f64).sqrt();
            let inv = 1.0 / m as f64;

            // pooling: every position receives grad_out / m
            let df2 = Tensor::from_fn(m, d, |_, j| grad_out[j] * inv);
            for t in 0..m {
                let bias = gattn.ff2_bias.row_mut(0);
                for (b, &g) in bias.iter_mut().zip(df2.row(t)) {
                    *b += g;
                }
            }
            gattn.ff2.add_assign(&relu.matmul_tn(&df2));
            let drelu = df2.matmul_nt(&attn.ff2);
            let df1 = Tensor::from_fn(m, d, |t, j| {
                if f1.get(t, j) > 0.0 {
                    drelu.get(t, j)
                } else {
                    0.0
                }
            });
            for t in 0..m {
                let bias = gattn.ff1_bias.row_mut(0);
                for (b, &g) in bias.iter_mut().zip(df1.row(t)) {
                    *b += g;
                }
            }
            gattn.ff1.add_assign(&y.matmul_tn(&df1));
            let dy = df1.matmul_nt(&attn.ff1);

            gattn.wo.add_assign(&concat.matmul_tn(&dy));
            let dconcat = dy.matmul_nt(&attn.wo);

            let mut dq = Tensor::zeros(m, d);
            let mut dk = Tensor::zeros(m, d);
            let mut dv = Tensor::zeros(m, d);
            for (h, a) in heads.iter().enumerate() {
                let off = h * dh;
                // dA = dOh · Vhᵀ ; dVh = Aᵀ · dOh
                let mut da = Tensor::zeros(m, m);
                for t in 0..m {
                    for u in 0..m {
                        let mut s = 0.0;
                        for j in 0..dh {
                            s += dconcat.get(t, off + j) * v.get(u, off + j);
                        }
                        da.set(t, u, s);
                    }
                }
                for u in 0..m {
                    for j in 0..dh {
                        let mut s = 0.0;
                        for t in 0..m {
                            s += a.get(t, u) * dconcat.get(t, off + j);
                        }
                        dv.set(u, off + j, s);
                    }
                }
                // softmax backward row by row
                let mut dlogit = Tensor::zeros(m, m);
                for t in 0..m {
                    let mut inner = 0.0;
                    for u in 0..m {
                        inner += da.get(t, u) * a.get(t, u);
                    }
                    for u in 0..m {
                        dlogit.set(t, u, a.get(t, u) * (da.get(t, u) - inner));
                    }
                }
                for t in 0..m {
                    for u in 0..m {
                        let g = dlogit.get(t, u) * scale;
                        if g == 0.0 {
                            continue;
                        }
                        for j in 0..dh {
                            let cur = dq.get(t, off + j);
                            dq.set(t, off + j, cur + g * k.get(u, off + j));
                            let cur = dk.get(u, off + j);
                            dk.set(u, off + j, cur + g * q.get(t, off + j));
                        }
                    }
                }
            }

            gattn.wq.add_assign(&x.matmul_tn(&dq));
            gattn.wk.add_assign(&x.matmul_tn(&dk));
            gattn.wv.add_assign(&x.matmul_tn(&dv));
            let mut dx = dq.matmul_nt(&attn.wq);
            dx.add_assign(&dk.matmul_nt(&attn.wk));
            dx.add_assign(&dv.matmul_nt(&attn.wv));

            for t in 0..m {
                let erow = grads.embedding.row_mut(ids[t] as usize);
                for (g, &val) in erow.iter_mut().zip(dx.row(t)) {
                    *g += val;
                }
                let prow = gattn.positional.row_mut(t);
                for (g, &val) in prow.iter_mut().zip(dx.row(t)) {
                    *g += val;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nbow_params(embedding: Tensor) -> EncoderParams {
        EncoderParams {
            kind: EncoderKind::Nbow,
            embedding,
            attn: None,
        }
    }

    fn identity_selfatt(embedding: Tensor, max_len: usize) -> EncoderParams {
        let d = embedding.cols();
        EncoderParams {
            kind: EncoderKind::SelfAtt,
            embedding,
            attn: Some(SelfAttParams {
                positional: Tensor::zeros(max_len, d),
                wq: Tensor::zeros(d, d),
                wk: Tensor::zeros(d, d),
                wv: Tensor::identity(d),
                wo: Tensor::identity(d),
                ff1: Tensor::identity(d),
                ff1_bias: Tensor::zeros(1, d),
                ff2: Tensor::identity(d),
                ff2_bias: Tensor::zeros(1, d),
            }),
        }
    }

    #[test]
    fn nbow_singleton_is_the_embedding() {
        let emb = Tensor::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.5, -2.0],
        ]);
        let params = nbow_params(emb);
        assert_eq!(encode_nbow(&params, &[2]).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn nbow_opposite_embeddings_cancel() {
        let emb = Tensor::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, -0.5],
            vec![-1.0, 0.5],
        ]);
        let params = nbow_params(emb);
        let out = encode_nbow(&params, &[2, 3]).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn nbow_all_padding_is_zero() {
        let params = nbow_params(Tensor::from_rows(&[vec![9.0, 9.0], vec![9.0, 9.0]]));
        assert_eq!(encode_nbow(&params, &[0, 0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(encode_nbow(&params, &[]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn nbow_is_permutation_invariant() {
        let emb = Tensor::from_fn(6, 4, |r, c| ((r * 7 + c) as f64 * 0.37).sin());
        let params = nbow_params(emb);
        let a = encode_nbow(&params, &[2, 3, 5]).unwrap();
        let b = encode_nbow(&params, &[5, 2, 3]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_id_is_an_error() {
        let params = nbow_params(Tensor::zeros(3, 2));
        assert!(matches!(
            encode_nbow(&params, &[7]),
            Err(Error::TokenIdOutOfRange { id: 7, size: 3 })
        ));
    }

    #[test]
    fn selfatt_output_dim_matches() {
        let emb = Tensor::from_fn(5, 4, |r, c| ((r + c) as f64).sin() * 0.3);
        let mut params = identity_selfatt(emb, 8);
        params.attn.as_mut().unwrap().wq = Tensor::from_fn(4, 4, |r, c| ((r * c) as f64).cos() * 0.2);
        for n in 1..5 {
            let ids: Vec<u32> = (0..n).map(|i| (i % 3 + 2) as u32).collect();
            assert_eq!(encode_selfatt(&params, &ids).unwrap().len(), 4);
        }
    }

    #[test]
    fn selfatt_is_position_sensitive() {
        // distinct embeddings and a nonzero positional table: swapping two
        // tokens must change the output
        let emb = Tensor::from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.9, 0.1],
            vec![0.1, 0.8],
        ]);
        let mut params = identity_selfatt(emb, 4);
        let attn = params.attn.as_mut().unwrap();
        attn.positional = Tensor::from_fn(4, 2, |r, c| 0.3 * (r as f64) + 0.1 * (c as f64));
        attn.wq = Tensor::from_fn(2, 2, |r, c| 0.5 + r as f64 - c as f64 * 0.25);
        attn.wk = Tensor::from_fn(2, 2, |r, c| 0.4 - r as f64 * 0.3 + c as f64 * 0.2);
        let ab = encode_selfatt(&params, &[2, 3]).unwrap();
        let ba = encode_selfatt(&params, &[3, 2]).unwrap();
        let diff: f64 = ab.iter().zip(&ba).map(|(x, y)| (x - y).abs()).sum();
        assert!(diff > 1e-9, "outputs {ab:?} vs {ba:?}");
    }

    #[test]
    fn selfatt_with_flat_attention_reduces_to_nbow() {
        // zero wq/wk make all logits equal, identity-like projections pass
        // values through; on non-negative embeddings the relu is inert
        let emb = Tensor::from_fn(6, 4, |r, c| (r * 4 + c) as f64 * 0.05);
        let selfatt = identity_selfatt(emb.clone(), 8);
        let nbow = nbow_params(emb);
        let ids = [2u32, 4, 5, 3];
        let a = encode_selfatt(&selfatt, &ids).unwrap();
        let b = encode_nbow(&nbow, &ids).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn selfatt_truncates_long_sequences() {
        let emb = Tensor::from_fn(4, 2, |r, c| (r + c) as f64 * 0.1);
        let params = identity_selfatt(emb, 3);
        let encoded = forward_selfatt(&params, &[2, 3, 2, 3, 2]).unwrap();
        assert!(encoded.truncated);
        let short = forward_selfatt(&params, &[2, 3, 2]).unwrap();
        assert_eq!(encoded.vector, short.vector);
    }
}
