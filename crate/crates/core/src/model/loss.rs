//! In-batch contrastive loss over raw inner products.
//!
//! For code vectors c_j and query vectors q_i the loss is
//! `-(1/N) sum_i log( exp(c_i.q_i) / sum_j exp(c_j.q_i) )`,
//! stabilized by subtracting the per-column maximum score before
//! exponentiation.

use crate::error::{Error, Result};
use crate::model::tensor::Tensor;

fn check_inputs(code: &Tensor, query: &Tensor) -> Result<usize> {
    if code.rows() != query.rows() || code.cols() != query.cols() {
        return Err(Error::DimensionMismatch {
            expected: code.rows().max(code.cols()),
            got: query.rows().max(query.cols()),
        });
    }
    if code.rows() < 2 {
        return Err(Error::BatchTooSmall { got: code.rows() });
    }
    if !code.is_finite() || !query.is_finite() {
        return Err(Error::NonFinite { context: "batch_loss inputs" });
    }
    Ok(code.rows())
}

/// Loss over a batch of N matched code/query vector pairs (rows).
pub fn batch_loss(code: &Tensor, query: &Tensor) -> Result<f64> {
    batch_loss_and_grads(code, query).map(|(loss, _, _)| loss)
}

/// Loss plus gradients with respect to the code and query vectors.
pub fn batch_loss_and_grads(code: &Tensor, query: &Tensor) -> Result<(f64, Tensor, Tensor)> {
    let n = check_inputs(code, query)?;
    // scores[j][i] = c_j . q_i; column i is the softmax for query i
    let scores = code.matmul_nt(query);

    let mut probs = Tensor::zeros(n, n);
    let mut loss = 0.0;
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            max = max.max(scores.get(j, i));
        }
        let mut denom = 0.0;
        for j in 0..n {
            let e = (scores.get(j, i) - max).exp();
            probs.set(j, i, e);
            denom += e;
        }
        for j in 0..n {
            probs.set(j, i, probs.get(j, i) / denom);
        }
        loss += max + denom.ln() - scores.get(i, i);
    }
    loss /= n as f64;

    // dL/dS[j][i] = (p[j][i] - [j == i]) / N
    let inv = 1.0 / n as f64;
    let mut dscores = probs;
    for j in 0..n {
        let cur = dscores.get(j, j);
        dscores.set(j, j, cur - 1.0);
    }
    for v in dscores.data_mut() {
        *v *= inv;
    }

    let dcode = dscores.matmul(query);
    let dquery = dscores.matmul_tn(code);
    Ok((loss, dcode, dquery))
}

/// Elementwise sum of two same-length modality vectors.
pub fn fuse(code_vec: &[f64], tree_vec: &[f64]) -> Result<Vec<f64>> {
    if code_vec.len() != tree_vec.len() {
        return Err(Error::DimensionMismatch {
            expected: code_vec.len(),
            got: tree_vec.len(),
        });
    }
    Ok(code_vec.iter().zip(tree_vec).map(|(a, b)| a + b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores_give_ln_n() {
        let code = Tensor::zeros(2, 3);
        let query = Tensor::zeros(2, 3);
        let loss = batch_loss(&code, &query).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);

        let loss4 = batch_loss(&Tensor::zeros(4, 3), &Tensor::zeros(4, 3)).unwrap();
        assert!((loss4 - 4f64.ln()).abs() < 1e-12);
    }

    /// Diagonal score s with zero off-diagonals:
    /// loss = ln(e^s + N - 1) - s, evaluated directly.
    #[test]
    fn diagonal_score_matches_direct_formula() {
        // orthogonal unit rows scaled by sqrt(s) give S = s I
        let s = 10.0f64;
        let r = s.sqrt();
        let code = Tensor::from_rows(&[vec![r, 0.0], vec![0.0, r]]);
        let query = Tensor::from_rows(&[vec![r, 0.0], vec![0.0, r]]);
        let loss = batch_loss(&code, &query).unwrap();
        let expected = (s.exp() + 1.0).ln() - s;
        assert!((loss - expected).abs() < 1e-9);
        assert!((loss - 4.54e-5).abs() < 1e-6);
    }

    #[test]
    fn loss_decreases_as_diagonal_grows() {
        let mut prev = f64::INFINITY;
        for s in [0.0f64, 0.5, 1.0, 2.0, 4.0] {
            let r = s.max(1e-12).sqrt();
            let code = Tensor::from_rows(&[vec![r, 0.0], vec![0.0, r]]);
            let query = Tensor::from_rows(&[vec![r, 0.0], vec![0.0, r]]);
            let loss = batch_loss(&code, &query).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
    }

    #[test]
    fn column_shift_invariance() {
        // appending a constant coordinate to the code rows and the shift to
        // the query rows adds t_i to every entry of column i
        let code = Tensor::from_rows(&[vec![0.3, -0.2], vec![-0.7, 0.9], vec![0.1, 0.4]]);
        let query = Tensor::from_rows(&[vec![0.5, 0.1], vec![0.2, -0.3], vec![-0.6, 0.8]]);
        let base = batch_loss(&code, &query).unwrap();

        let shifts = [3.0, -2.0, 0.5];
        let code_aug = Tensor::from_fn(3, 3, |r, c| if c < 2 { code.get(r, c) } else { 1.0 });
        let query_aug = Tensor::from_fn(3, 3, |r, c| if c < 2 { query.get(r, c) } else { shifts[r] });
        let shifted = batch_loss(&code_aug, &query_aug).unwrap();
        assert!((base - shifted).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            batch_loss(&Tensor::zeros(1, 2), &Tensor::zeros(1, 2)),
            Err(Error::BatchTooSmall { got: 1 })
        ));
        assert!(matches!(
            batch_loss(&Tensor::zeros(2, 2), &Tensor::zeros(2, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = Tensor::zeros(2, 2);
        bad.set(0, 0, f64::NAN);
        assert!(matches!(
            batch_loss(&bad, &Tensor::zeros(2, 2)),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn loss_is_nonnegative() {
        let code = Tensor::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let query = Tensor::from_rows(&[vec![1.0, 0.1], vec![-0.2, 1.0]]);
        assert!(batch_loss(&code, &query).unwrap() >= 0.0);
    }

    #[test]
    fn grads_match_finite_differences() {
        let mut code = Tensor::from_rows(&[vec![0.3, -0.4, 0.2], vec![-0.1, 0.6, -0.5]]);
        let mut query = Tensor::from_rows(&[vec![0.2, 0.3, -0.6], vec![0.7, -0.2, 0.1]]);
        let (_, dcode, dquery) = batch_loss_and_grads(&code, &query).unwrap();
        let eps = 1e-6;
        for r in 0..2 {
            for c in 0..3 {
                let orig = code.get(r, c);
                code.set(r, c, orig + eps);
                let plus = batch_loss(&code, &query).unwrap();
                code.set(r, c, orig - eps);
                let minus = batch_loss(&code, &query).unwrap();
                code.set(r, c, orig);
                let num = (plus - minus) / (2.0 * eps);
                assert!((num - dcode.get(r, c)).abs() < 1e-7);

                let orig = query.get(r, c);
                query.set(r, c, orig + eps);
                let plus = batch_loss(&code, &query).unwrap();
                query.set(r, c, orig - eps);
                let minus = batch_loss(&code, &query).unwrap();
                query.set(r, c, orig);
                let num = (plus - minus) / (2.0 * eps);
                assert!((num - dquery.get(r, c)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn fuse_sums_elementwise() {
        assert_eq!(fuse(&[0.5, -1.0], &[0.5, 1.0]).unwrap(), vec![1.0, 0.0]);
        let v = vec![0.1, 0.2, 0.3];
        assert_eq!(fuse(&v, &[0.0, 0.0, 0.0]).unwrap(), v);
        assert_eq!(fuse(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), fuse(&[3.0, 4.0], &[1.0, 2.0]).unwrap());
        assert!(fuse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
