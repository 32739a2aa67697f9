//! Deterministic random tree generation for tests and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ast::{NodeKind, Tree, TreeBuilder};

/// Generate a random tree with `node_count` nodes. Every internal node is
/// a nonterminal and every leaf a terminal; labels are drawn from a pool
/// of `label_pool` distinct names, so label collisions occur for small
/// pools. Deterministic under `seed`.
pub fn random_tree(seed: u64, node_count: usize, label_pool: usize) -> Tree {
    assert!(node_count >= 1);
    assert!(label_pool >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // random recursive tree: attach node i to a uniform earlier node
    let mut parents = vec![0usize; node_count];
    for (i, parent) in parents.iter_mut().enumerate().skip(1) {
        *parent = rng.random_range(0..i);
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); node_count];
    for (i, &p) in parents.iter().enumerate().skip(1) {
        children[p].push(i);
    }
    let labels: Vec<String> = (0..node_count)
        .map(|_| format!("lbl{}", rng.random_range(0..label_pool)))
        .collect();

    let mut builder = TreeBuilder::new();
    // emit in pre-order so node ids are canonical
    let mut stack = vec![(0usize, None::<usize>)];
    while let Some((orig, parent)) = stack.pop() {
        let kind = if children[orig].is_empty() {
            NodeKind::Terminal
        } else {
            NodeKind::Nonterminal
        };
        let id = builder.add(parent, labels[orig].clone(), kind);
        for &c in children[orig].iter().rev() {
            stack.push((c, Some(id)));
        }
    }
    builder.finish()
}
