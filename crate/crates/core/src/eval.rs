//! Retrieval metrics (MRR, NDCG) and mode-comparison reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Tensor;

/// Cosine similarity matrix: rows are snippet vectors, columns are query
/// vectors. Zero vectors score 0 against everything.
pub fn cosine_score_matrix(snippets: &Tensor, queries: &Tensor) -> Tensor {
    let norms = |t: &Tensor| -> Vec<f64> {
        (0..t.rows())
            .map(|r| t.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    };
    let sn = norms(snippets);
    let qn = norms(queries);
    Tensor::from_fn(snippets.rows(), queries.rows(), |i, j| {
        if sn[i] == 0.0 || qn[j] == 0.0 {
            0.0
        } else {
            crate::model::dot_product(snippets.row(i), queries.row(j)) / (sn[i] * qn[j])
        }
    })
}

/// Reciprocal-rank mean over one square score batch. Column `j` is query
/// `j`; its target is the diagonal entry, and the rank counts snippets
/// scoring strictly higher (ties favor the target).
pub fn mrr_batch(scores: &Tensor) -> Result<f64> {
    if scores.rows() != scores.cols() {
        return Err(Error::NonSquareScores {
            rows: scores.rows(),
            cols: scores.cols(),
        });
    }
    let n = scores.rows();
    if n == 0 {
        return Err(Error::InvalidConfig("mrr needs a non-empty batch".into()));
    }
    let mut sum = 0.0;
    for j in 0..n {
        let target = scores.get(j, j);
        let better = (0..n).filter(|&i| i != j && scores.get(i, j) > target).count();
        sum += 1.0 / (1 + better) as f64;
    }
    Ok(sum / n as f64)
}

/// Mean of per-batch MRR values.
pub fn mrr(batches: &[Tensor]) -> Result<f64> {
    if batches.is_empty() {
        return Err(Error::InvalidConfig("mrr needs at least one batch".into()));
    }
    let mut sum = 0.0;
    for batch in batches {
        sum += mrr_batch(batch)?;
    }
    Ok(sum / batches.len() as f64)
}

/// Normalized discounted cumulative gain over graded-relevance rankings.
///
/// Gain is `(2^rel - 1) / log2(pos + 1)` with 1-based positions,
/// normalized by the ideal ordering. Queries with all-zero relevance
/// contribute 0; the result is the mean over queries.
pub fn ndcg(ranked_relevances: &[Vec<f64>]) -> Result<f64> {
    if ranked_relevances.is_empty() {
        return Err(Error::InvalidConfig("ndcg needs at least one query".into()));
    }
    let mut sum = 0.0;
    for (q, rels) in ranked_relevances.iter().enumerate() {
        if let Some((position, &value)) =
            rels.iter().enumerate().find(|&(_, &r)| r < 0.0)
        {
            return Err(Error::NegativeRelevance {
                query: q,
                position,
                value,
            });
        }
        let actual = dcg(rels.iter().copied());
        let mut ideal = rels.clone();
        ideal.sort_by(|a, b| b.partial_cmp(a).expect("relevances are finite"));
        let ideal_dcg = dcg(ideal.into_iter());
        if ideal_dcg > 0.0 {
            sum += actual / ideal_dcg;
        }
    }
    Ok(sum / ranked_relevances.len() as f64)
}

fn dcg(rels: impl Iterator<Item = f64>) -> f64 {
    rels.enumerate()
        .map(|(i, rel)| (2f64.powf(rel) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// Binary-relevance lists for NDCG from a square score batch: for each
/// query, a ranked relevance list with 1 at the target's rank (same tie
/// rule as [`mrr_batch`]) and 0 elsewhere.
pub fn binary_relevance_lists(scores: &Tensor) -> Result<Vec<Vec<f64>>> {
    if scores.rows() != scores.cols() {
        return Err(Error::NonSquareScores {
            rows: scores.rows(),
            cols: scores.cols(),
        });
    }
    let n = scores.rows();
    Ok((0..n)
        .map(|j| {
            let target = scores.get(j, j);
            let better = (0..n).filter(|&i| i != j && scores.get(i, j) > target).count();
            let mut rels = vec![0.0; n];
            rels[better] = 1.0;
            rels
        })
        .collect())
}

/// Per-mode evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: String,
    pub mrr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ndcg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_coverage: Option<f64>,
    /// Distractor snippets per query when MRR was computed.
    pub distractors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub change_ratio: Option<f64>,
}

/// Comparison of several modes against the uni-code baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub baseline: String,
    pub best_mode: String,
    pub modes: Vec<ModeReport>,
}

/// Fill change ratios relative to the uni-code baseline and flag the best
/// score. Input order is preserved.
pub fn compare(mut reports: Vec<ModeReport>) -> Result<EvalReport> {
    let baseline = reports
        .iter()
        .find(|r| r.mode == "uni-code")
        .ok_or(Error::MissingBaseline)?;
    let base_mrr = baseline.mrr;
    for report in &mut reports {
        report.change_ratio = Some((report.mrr - base_mrr) / base_mrr);
    }
    let best_mode = reports
        .iter()
        .max_by(|a, b| a.mrr.partial_cmp(&b.mrr).expect("finite scores"))
        .expect("at least the baseline exists")
        .mode
        .clone();
    Ok(EvalReport {
        baseline: "uni-code".into(),
        best_mode,
        modes: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn cosine_matrix_units() {
        let snippets = Tensor::from_rows(&[
            vec![2.0, 0.0],
            vec![0.0, 5.0],
            vec![0.0, 0.0],
        ]);
        let queries = Tensor::from_rows(&[vec![0.5, 0.0], vec![3.0, 3.0]]);
        let scores = cosine_score_matrix(&snippets, &queries);
        assert!((scores.get(0, 0) - 1.0).abs() < 1e-12); // parallel
        assert!(scores.get(1, 0).abs() < 1e-12); // orthogonal
        assert_eq!(scores.get(2, 0), 0.0); // zero vector
        assert!((scores.get(0, 1) - (0.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mrr_all_targets_first() {
        let scores = Tensor::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 });
        assert_eq!(mrr(&[scores]).unwrap(), 1.0);
    }

    #[test]
    fn mrr_rank_three_is_a_third() {
        // every column has two competitors strictly above the target
        let scores = Tensor::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let value = mrr_batch(&scores).unwrap();
        assert!((value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mrr_ties_favor_the_target() {
        let scores = Tensor::from_fn(3, 3, |_, _| 0.5);
        assert_eq!(mrr_batch(&scores).unwrap(), 1.0);
    }

    #[test]
    fn mrr_rejects_non_square() {
        assert!(matches!(
            mrr_batch(&Tensor::zeros(2, 3)),
            Err(Error::NonSquareScores { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn mrr_averages_over_batches() {
        let perfect = Tensor::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        let worst = Tensor::from_fn(2, 2, |i, j| if i == j { 0.0 } else { 1.0 });
        let value = mrr(&[perfect, worst]).unwrap();
        assert!((value - 0.75).abs() < 1e-12);
    }

    /// Oracle equivalence: rank from the counting rule matches a full sort
    /// with the same tie policy.
    #[test]
    fn mrr_matches_sort_based_ranks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.random_range(2..30);
            let scores = Tensor::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let expected: f64 = (0..n)
                .map(|j| {
                    let mut col: Vec<f64> = (0..n).map(|i| scores.get(i, j)).collect();
                    let target = col[j];
                    col.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    let rank = col.iter().position(|&s| s <= target).unwrap() + 1;
                    1.0 / rank as f64
                })
                .sum::<f64>()
                / n as f64;
            assert!((mrr_batch(&scores).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn mrr_uniform_random_matches_harmonic_expectation() {
        // E[1/rank] = H_n / n for a uniform rank among n candidates
        let n = 100;
        let trials = 40;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut batches = Vec::new();
        for _ in 0..trials {
            batches.push(Tensor::from_fn(n, n, |_, _| rng.random_range(0.0..1.0)));
        }
        let value = mrr(&batches).unwrap();
        let harmonic: f64 = (1..=n).map(|r| 1.0 / r as f64).sum::<f64>() / n as f64;
        assert!((value - harmonic).abs() < 0.01, "{value} vs {harmonic}");
    }

    /// Direct formula evaluation, kept separate from the implementation.
    fn ndcg_oracle(rels: &[f64]) -> f64 {
        let gain = |rel: f64, pos: usize| (2f64.powf(rel) - 1.0) / ((pos + 1) as f64).log2();
        let dcg: f64 = rels.iter().enumerate().map(|(i, &r)| gain(r, i + 1)).sum();
        let mut ideal = rels.to_vec();
        ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let idcg: f64 = ideal.iter().enumerate().map(|(i, &r)| gain(r, i + 1)).sum();
        if idcg == 0.0 {
            0.0
        } else {
            dcg / idcg
        }
    }

    #[test]
    fn ndcg_ideal_order_is_one() {
        assert_eq!(ndcg(&[vec![3.0, 2.0, 0.0]]).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_reversed_order_matches_direct_evaluation() {
        let value = ndcg(&[vec![0.0, 2.0, 3.0]]).unwrap();
        let expected = ndcg_oracle(&[0.0, 2.0, 3.0]);
        assert!((value - expected).abs() < 1e-12);
        // frozen from the oracle: (3/log2(3) + 7/2) / (7 + 3/log2(3))
        assert!((value - 0.6064).abs() < 1e-3, "{value}");
    }

    #[test]
    fn ndcg_all_zero_is_zero() {
        assert_eq!(ndcg(&[vec![0.0, 0.0, 0.0]]).unwrap(), 0.0);
    }

    #[test]
    fn ndcg_negative_relevance_is_rejected() {
        assert!(matches!(
            ndcg(&[vec![1.0, -0.5]]),
            Err(Error::NegativeRelevance { query: 0, position: 1, .. })
        ));
    }

    #[test]
    fn ndcg_means_over_queries() {
        let a = ndcg_oracle(&[0.0, 1.0]);
        let value = ndcg(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((value - (1.0 + a) / 2.0).abs() < 1e-12);
    }

    fn report(mode: &str, mrr: f64) -> ModeReport {
        ModeReport {
            mode: mode.into(),
            mrr,
            ndcg: None,
            link_coverage: None,
            node_coverage: None,
            distractors: 999,
            change_ratio: None,
        }
    }

    #[test]
    fn compare_change_ratios() {
        let result = compare(vec![report("uni-code", 0.7533), report("uni-sbt", 0.8662)]).unwrap();
        let sbt = &result.modes[1];
        assert!((sbt.change_ratio.unwrap() * 100.0 - 14.99).abs() < 0.01);
        assert_eq!(result.modes[0].change_ratio, Some(0.0));
        assert_eq!(result.best_mode, "uni-sbt");
    }

    #[test]
    fn compare_ruby_multi_rootpath() {
        let result =
            compare(vec![report("uni-code", 0.3113), report("multi-rootpath", 0.3602)]).unwrap();
        let multi = &result.modes[1];
        assert!((multi.change_ratio.unwrap() * 100.0 - 15.70).abs() < 0.01);
    }

    #[test]
    fn compare_requires_baseline() {
        assert!(matches!(
            compare(vec![report("uni-sbt", 0.5)]),
            Err(Error::MissingBaseline)
        ));
    }
}
