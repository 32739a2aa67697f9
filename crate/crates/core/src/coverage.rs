//! Link and node coverage of serialized sequences against their source
//! tree.
//!
//! Link coverage is the fraction of parent-child adjacencies a collection
//! of sequences touches; node coverage is the fraction of unique labels it
//! contains. Nodes sharing a label count as one unique node.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::ast::{NodeId, SstTree};
use crate::error::{Error, Result};
use crate::serialize::CoverageFootprint;

/// Coverage of one tree by one collection of sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub link_coverage: f64,
    pub node_coverage: f64,
    pub covered_links: usize,
    pub total_links: usize,
    pub covered_nodes: usize,
    pub total_nodes: usize,
}

/// Mean coverage over a corpus of per-item reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub link_coverage: f64,
    pub node_coverage: f64,
    pub items: usize,
}

/// Coverage of `tree` by the union of `footprints`.
///
/// Every footprint must reference `tree`. An empty collection covers
/// nothing. A single-node tree has no links; its link coverage is
/// reported as 0.
pub fn coverage(footprints: &[CoverageFootprint], tree: &SstTree) -> Result<CoverageReport> {
    let tree_id = tree.uid();
    let mut links: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    let mut labels: BTreeSet<&str> = BTreeSet::new();
    for fp in footprints {
        if fp.tree_id != tree_id {
            return Err(Error::FootprintMismatch {
                footprint: fp.tree_id,
                tree: tree_id,
            });
        }
        links.extend(&fp.covered_links);
        labels.extend(fp.covered_labels.iter().map(String::as_str));
    }
    let total_links = tree.len() - 1;
    let total_nodes = tree.unique_labels().len();
    let covered_links = links.len();
    let covered_nodes = labels.len();
    Ok(CoverageReport {
        link_coverage: ratio(covered_links, total_links),
        node_coverage: ratio(covered_nodes, total_nodes),
        covered_links,
        total_links,
        covered_nodes,
        total_nodes,
    })
}

fn ratio(covered: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}

/// Footprint of the plain token representation: no links, all labels.
pub fn token_footprint(tree: &SstTree) -> CoverageFootprint {
    let mut fp = CoverageFootprint::empty(tree);
    fp.covered_labels
        .extend(tree.unique_labels().into_iter().map(str::to_string));
    fp
}

/// Arithmetic mean of per-item ratios.
pub fn corpus_coverage(reports: &[CoverageReport]) -> Result<CoverageSummary> {
    if reports.is_empty() {
        return Err(Error::EmptyCoverage);
    }
    let n = reports.len() as f64;
    Ok(CoverageSummary {
        link_coverage: reports.iter().map(|r| r.link_coverage).sum::<f64>() / n,
        node_coverage: reports.iter().map(|r| r.node_coverage).sum::<f64>() / n,
        items: reports.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{NodeKind, Tree, TreeBuilder};
    use crate::serialize::{lcrs_serialize, root_paths, sbt_serialize, SamplerConfig};
    use crate::treegen::random_tree;

    /// A tree with 32 nodes, 31 links, and 16 unique labels: the root plus
    /// 15 inner nodes with distinct labels and 16 leaves reusing them.
    fn worked_tree() -> Tree {
        let mut b = TreeBuilder::new();
        let root = b.add(None, "n0", NodeKind::Nonterminal);
        let mut inner = vec![root];
        for i in 1..16 {
            let parent = inner[(i - 1) / 2];
            inner.push(b.add(Some(parent), format!("n{i}"), NodeKind::Nonterminal));
        }
        for i in 0..16 {
            b.add(Some(inner[i]), format!("n{}", 15 - i), NodeKind::Terminal);
        }
        b.finish()
    }

    fn footprint_with(tree: &Tree, links: usize, labels: usize) -> CoverageFootprint {
        let mut fp = CoverageFootprint::empty(tree);
        fp.covered_links.extend(tree.links().take(links));
        fp.covered_labels.extend(
            tree.unique_labels()
                .into_iter()
                .take(labels)
                .map(str::to_string),
        );
        fp
    }

    #[test]
    fn worked_tree_has_the_documented_stats() {
        let tree = worked_tree();
        let stats = crate::ast::tree_stats(&tree);
        assert_eq!(stats.node_count, 32);
        assert_eq!(stats.link_count, 31);
        assert_eq!(stats.unique_label_count, 16);
    }

    #[test]
    fn worked_example_ratios() {
        let tree = worked_tree();
        let rootpath_like = footprint_with(&tree, 8, 8);
        let report = coverage(&[rootpath_like], &tree).unwrap();
        assert!((report.link_coverage - 0.2581).abs() < 1e-4);
        assert!((report.node_coverage - 0.5000).abs() < 1e-4);

        let leafpath_like = footprint_with(&tree, 7, 6);
        let report = coverage(&[leafpath_like], &tree).unwrap();
        assert!((report.link_coverage - 0.2258).abs() < 1e-4);
        assert!((report.node_coverage - 0.3750).abs() < 1e-4);
    }

    #[test]
    fn empty_footprints_cover_nothing() {
        let tree = worked_tree();
        let report = coverage(&[], &tree).unwrap();
        assert_eq!(report.link_coverage, 0.0);
        assert_eq!(report.node_coverage, 0.0);
    }

    #[test]
    fn token_footprint_is_all_labels_no_links() {
        for seed in 0..10 {
            let tree = random_tree(seed, 1 + (seed as usize * 11) % 60, 6);
            let report = coverage(&[token_footprint(&tree)], &tree).unwrap();
            assert_eq!(report.link_coverage, 0.0);
            assert_eq!(report.node_coverage, 1.0);
        }
    }

    #[test]
    fn single_node_token_footprint() {
        let mut b = TreeBuilder::new();
        b.add(None, "only", NodeKind::Terminal);
        let tree = b.finish();
        let fp = token_footprint(&tree);
        assert_eq!(fp.covered_labels.len(), 1);
        assert!(fp.covered_labels.contains("only"));
    }

    #[test]
    fn mismatched_footprint_is_rejected() {
        let a = random_tree(1, 20, 5);
        let b = random_tree(2, 20, 5);
        let fp = token_footprint(&a);
        assert!(matches!(
            coverage(&[fp], &b),
            Err(Error::FootprintMismatch { .. })
        ));
    }

    #[test]
    fn coverage_is_monotone_in_footprints() {
        let cfg = SamplerConfig::default();
        for seed in 0..10 {
            let tree = random_tree(seed, 10 + seed as usize * 5, 6);
            let paths = root_paths(&tree, &cfg);
            let some: Vec<_> = paths.iter().take(paths.len() / 2).cloned().map(|s| s.footprint).collect();
            let all: Vec<_> = paths.into_iter().map(|s| s.footprint).collect();
            let sub = coverage(&some, &tree).unwrap();
            let sup = coverage(&all, &tree).unwrap();
            assert!(sup.link_coverage >= sub.link_coverage);
            assert!(sup.node_coverage >= sub.node_coverage);
        }
    }

    #[test]
    fn sbt_and_lcrs_footprint_ratios() {
        for seed in 0..10 {
            let tree = random_tree(seed, 5 + seed as usize * 7, 6);
            let sbt = coverage(&[sbt_serialize(&tree).footprint], &tree).unwrap();
            assert_eq!((sbt.link_coverage, sbt.node_coverage), (1.0, 1.0));
            let lcrs = coverage(&[lcrs_serialize(&tree).footprint], &tree).unwrap();
            assert_eq!(lcrs.node_coverage, 1.0);
        }
    }

    #[test]
    fn multimodal_union_has_full_node_coverage() {
        let cfg = SamplerConfig::default();
        for seed in 0..10 {
            let tree = random_tree(seed, 8 + seed as usize * 9, 6);
            for seqs in [root_paths(&tree, &cfg), leaf_pathset(&tree, &cfg)] {
                let mut fps = vec![token_footprint(&tree)];
                fps.extend(seqs.into_iter().map(|s| s.footprint));
                let report = coverage(&fps, &tree).unwrap();
                assert_eq!(report.node_coverage, 1.0);
            }
        }
    }

    fn leaf_pathset(tree: &Tree, cfg: &SamplerConfig) -> Vec<crate::serialize::SerializedSeq> {
        crate::serialize::leaf_paths(tree, cfg)
    }

    #[test]
    fn all_sbt_corpus_is_fully_covered() {
        let reports: Vec<CoverageReport> = (0..20)
            .map(|seed| {
                let tree = random_tree(seed, 5 + seed as usize * 3, 7);
                coverage(&[sbt_serialize(&tree).footprint], &tree).unwrap()
            })
            .collect();
        let summary = corpus_coverage(&reports).unwrap();
        assert_eq!((summary.link_coverage, summary.node_coverage), (1.0, 1.0));
    }

    #[test]
    fn corpus_mean() {
        let r = |l, n| CoverageReport {
            link_coverage: l,
            node_coverage: n,
            covered_links: 0,
            total_links: 0,
            covered_nodes: 0,
            total_nodes: 0,
        };
        let mean = corpus_coverage(&[r(0.2, 0.4), r(0.4, 0.6)]).unwrap();
        assert!((mean.link_coverage - 0.3).abs() < 1e-12);
        assert!((mean.node_coverage - 0.5).abs() < 1e-12);

        let one = corpus_coverage(&[r(0.7, 0.9)]).unwrap();
        assert_eq!((one.link_coverage, one.node_coverage), (0.7, 0.9));

        assert!(matches!(corpus_coverage(&[]), Err(Error::EmptyCoverage)));
    }

    /// Brute-force recount from raw sequences: every adjacent pair of
    /// labels in a rootpath is one link walked from the leaf.
    #[test]
    fn footprint_counts_match_sequence_recount_on_small_trees() {
        let cfg = SamplerConfig { n_paths: 1000, ..Default::default() };
        for seed in 0..20 {
            let tree = random_tree(seed, 2 + (seed as usize % 18), 8);
            let paths = root_paths(&tree, &cfg);
            // every leaf yields one path; recount links as (depth of leaf)
            let expected_links: BTreeSet<(NodeId, NodeId)> = tree
                .leaves()
                .flat_map(|leaf| {
                    let mut links = Vec::new();
                    let mut cur = leaf;
                    while let Some(p) = tree.parent(cur) {
                        links.push((p, cur));
                        cur = p;
                    }
                    links
                })
                .collect();
            let fps: Vec<_> = paths.into_iter().map(|s| s.footprint).collect();
            let report = coverage(&fps, &tree).unwrap();
            assert_eq!(report.covered_links, expected_links.len());
        }
    }
}
