//! The four tree-serialized representations and their coverage footprints.
//!
//! RootPath and LeafPath are sampling-based; SBT and LCRS are
//! traversal-based and come with exact deserializers so round-trips can be
//! checked. Every sequence records precisely which tree links and labels
//! it covers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::ast::{NodeId, NodeKind, SstTree, Tree, TreeBuilder};
use crate::error::{Error, Result};

/// Serialization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    RootPath,
    LeafPath,
    Sbt,
    Lcrs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::RootPath, Method::LeafPath, Method::Sbt, Method::Lcrs];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::RootPath => "rootpath",
            Method::LeafPath => "leafpath",
            Method::Sbt => "sbt",
            Method::Lcrs => "lcrs",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rootpath" => Ok(Method::RootPath),
            "leafpath" => Ok(Method::LeafPath),
            "sbt" => Ok(Method::Sbt),
            "lcrs" => Ok(Method::Lcrs),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The tree links and labels one or more sequences cover, keyed by the
/// source tree's content id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageFootprint {
    pub tree_id: u64,
    pub covered_links: BTreeSet<(NodeId, NodeId)>,
    pub covered_labels: BTreeSet<String>,
}

impl CoverageFootprint {
    pub fn empty(tree: &Tree) -> Self {
        CoverageFootprint {
            tree_id: tree.uid(),
            covered_links: BTreeSet::new(),
            covered_labels: BTreeSet::new(),
        }
    }
}

/// One serialized token sequence plus its footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct SerializedSeq {
    pub tokens: Vec<String>,
    pub footprint: CoverageFootprint,
    pub method: Method,
}

/// Path sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Number of sampled tree paths per snippet.
    pub n_paths: usize,
    /// LeafPath sequences longer than this many tokens are discarded.
    pub length_threshold: usize,
    /// LeafPath pairs whose leg-height difference is below this are
    /// discarded.
    pub width_threshold: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_paths: 20,
            length_threshold: 8,
            width_threshold: 2,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::InvalidConfig("n_paths must be >= 1".into()));
        }
        if self.length_threshold < 1 || self.width_threshold < 1 {
            return Err(Error::InvalidConfig("thresholds must be >= 1".into()));
        }
        Ok(())
    }
}

fn is_single_char_terminal(tree: &Tree, id: NodeId) -> bool {
    tree.node(id).kind == NodeKind::Terminal && tree.label(id).chars().count() == 1
}

/// Sample up to `amount` indices from `0..len` without replacement,
/// returned in ascending order.
fn sample_indices(rng: &mut ChaCha8Rng, len: usize, amount: usize) -> Vec<usize> {
    if amount >= len {
        return (0..len).collect();
    }
    let mut picked = rand::seq::index::sample(rng, len, amount).into_vec();
    picked.sort_unstable();
    picked
}

/// One path per leaf, from the leaf up to and including the root.
///
/// Leaves whose label is a single-character identifier are skipped unless
/// the remaining leaves alone cannot supply `n_paths` candidates. When
/// more candidates than `n_paths` survive, `n_paths` are sampled
/// uniformly without replacement under the sampler seed.
pub fn root_paths(sst: &SstTree, cfg: &SamplerConfig) -> Vec<SerializedSeq> {
    let leaves: Vec<NodeId> = sst.leaves().collect();
    let multi: Vec<NodeId> = leaves
        .iter()
        .copied()
        .filter(|&id| !is_single_char_terminal(sst, id))
        .collect();
    let candidates = if multi.len() >= cfg.n_paths { multi } else { leaves };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let picked = sample_indices(&mut rng, candidates.len(), cfg.n_paths);

    picked
        .into_iter()
        .map(|i| {
            let leaf = candidates[i];
            let mut tokens = vec![sst.label(leaf).to_string()];
            let mut footprint = CoverageFootprint::empty(sst);
            footprint.covered_labels.insert(sst.label(leaf).to_string());
            let mut cur = leaf;
            while let Some(parent) = sst.parent(cur) {
                tokens.push(sst.label(parent).to_string());
                footprint.covered_links.insert((parent, cur));
                footprint.covered_labels.insert(sst.label(parent).to_string());
                cur = parent;
            }
            SerializedSeq {
                tokens,
                footprint,
                method: Method::RootPath,
            }
        })
        .collect()
}

/// Paths between two leaves through their lowest common ancestor.
///
/// Candidates longer than `length_threshold` tokens, or whose two leg
/// heights differ by less than `width_threshold`, are discarded. Pairs
/// where both leaves are multi-character identifiers take priority; the
/// rest only fill in when those run out. Returns an empty list when
/// nothing survives.
pub fn leaf_paths(sst: &SstTree, cfg: &SamplerConfig) -> Vec<SerializedSeq> {
    let leaves: Vec<NodeId> = sst.leaves().collect();
    if leaves.len() < 2 {
        return Vec::new();
    }
    let depths: Vec<usize> = (0..sst.len()).map(|id| sst.depth(id)).collect();

    let mut preferred: Vec<(NodeId, NodeId)> = Vec::new();
    let mut fallback: Vec<(NodeId, NodeId)> = Vec::new();
    for i in 0..leaves.len() {
        for j in (i + 1)..leaves.len() {
            let (a, b) = (leaves[i], leaves[j]);
            let lca = lowest_common_ancestor(sst, &depths, a, b);
            let leg_a = depths[a] - depths[lca];
            let leg_b = depths[b] - depths[lca];
            let token_len = leg_a + leg_b + 1;
            if token_len > cfg.length_threshold {
                continue;
            }
            if leg_a.abs_diff(leg_b) < cfg.width_threshold {
                continue;
            }
            if is_single_char_terminal(sst, a) || is_single_char_terminal(sst, b) {
                fallback.push((a, b));
            } else {
                preferred.push((a, b));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut chosen: Vec<(NodeId, NodeId)> = Vec::new();
    if preferred.len() >= cfg.n_paths {
        let picked = sample_indices(&mut rng, preferred.len(), cfg.n_paths);
        chosen.extend(picked.into_iter().map(|i| preferred[i]));
    } else {
        chosen.extend(preferred.iter().copied());
        let need = cfg.n_paths - chosen.len();
        let picked = sample_indices(&mut rng, fallback.len(), need);
        chosen.extend(picked.into_iter().map(|i| fallback[i]));
    }

    chosen
        .into_iter()
        .map(|(a, b)| leaf_path_seq(sst, &depths, a, b))
        .collect()
}

fn lowest_common_ancestor(tree: &Tree, depths: &[usize], a: NodeId, b: NodeId) -> NodeId {
    let (mut x, mut y) = (a, b);
    while depths[x] > depths[y] {
        x = tree.parent(x).expect("depth > 0 implies a parent");
    }
    while depths[y] > depths[x] {
        y = tree.parent(y).expect("depth > 0 implies a parent");
    }
    while x != y {
        x = tree.parent(x).expect("distinct nodes share an ancestor");
        y = tree.parent(y).expect("distinct nodes share an ancestor");
    }
    x
}

fn leaf_path_seq(tree: &Tree, depths: &[usize], start: NodeId, end: NodeId) -> SerializedSeq {
    let lca = lowest_common_ancestor(tree, depths, start, end);
    let mut footprint = CoverageFootprint::empty(tree);

    // upward leg: start leaf, then ancestors up to the lca
    let mut tokens = vec![tree.label(start).to_string()];
    let mut cur = start;
    while cur != lca {
        let parent = tree.parent(cur).expect("lca is an ancestor of start");
        footprint.covered_links.insert((parent, cur));
        if parent != lca {
            tokens.push(tree.label(parent).to_string());
        }
        cur = parent;
    }
    tokens.push(tree.label(lca).to_string());

    // downward leg: lca's descendant chain to the end leaf
    let mut down = Vec::new();
    cur = end;
    while cur != lca {
        let parent = tree.parent(cur).expect("lca is an ancestor of end");
        footprint.covered_links.insert((parent, cur));
        if cur != end {
            down.push(tree.label(cur).to_string());
        }
        cur = parent;
    }
    tokens.extend(down.into_iter().rev());
    tokens.push(tree.label(end).to_string());

    for token in &tokens {
        footprint.covered_labels.insert(token.clone());
    }
    SerializedSeq {
        tokens,
        footprint,
        method: Method::LeafPath,
    }
}

/// Structure-based traversal: `(` children `)` label, recursively. Covers
/// every link and every label.
pub fn sbt_serialize(sst: &SstTree) -> SerializedSeq {
    let mut tokens = Vec::with_capacity(3 * sst.len());
    sbt_tokens(sst, sst.root(), &mut tokens);
    let mut footprint = CoverageFootprint::empty(sst);
    footprint.covered_links.extend(sst.links());
    footprint
        .covered_labels
        .extend(sst.unique_labels().into_iter().map(str::to_string));
    SerializedSeq {
        tokens,
        footprint,
        method: Method::Sbt,
    }
}

fn sbt_tokens(tree: &Tree, id: NodeId, out: &mut Vec<String>) {
    out.push("(".to_string());
    for &child in tree.children(id) {
        sbt_tokens(tree, child, out);
    }
    out.push(")".to_string());
    out.push(tree.label(id).to_string());
}

/// Rebuild a tree from its SBT token sequence. Node kinds are inferred
/// from arity: leaves become terminals.
pub fn sbt_deserialize(tokens: &[String]) -> Result<Tree> {
    let mut pos = 0;
    let parsed = sbt_parse(tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(Error::TokenStream {
            index: pos,
            message: "trailing tokens after a complete tree".into(),
        });
    }
    let mut builder = TreeBuilder::new();
    emit_parsed(&parsed, None, &mut builder);
    Ok(builder.finish())
}

struct ParsedNode {
    label: String,
    children: Vec<ParsedNode>,
}

fn sbt_parse(tokens: &[String], pos: &mut usize) -> Result<ParsedNode> {
    expect_bracket(tokens, pos, "(")?;
    let mut children = Vec::new();
    while tokens.get(*pos).map(String::as_str) == Some("(") {
        children.push(sbt_parse(tokens, pos)?);
    }
    expect_bracket(tokens, pos, ")")?;
    let label = expect_label(tokens, pos)?;
    Ok(ParsedNode { label, children })
}

fn expect_bracket(tokens: &[String], pos: &mut usize, bracket: &str) -> Result<()> {
    match tokens.get(*pos) {
        Some(t) if t == bracket => {
            *pos += 1;
            Ok(())
        }
        Some(t) => Err(Error::TokenStream {
            index: *pos,
            message: format!("expected \"{bracket}\", found \"{t}\""),
        }),
        None => Err(Error::TokenStream {
            index: *pos,
            message: format!("expected \"{bracket}\", found end of tokens"),
        }),
    }
}

fn expect_label(tokens: &[String], pos: &mut usize) -> Result<String> {
    match tokens.get(*pos) {
        Some(t) if t != "(" && t != ")" => {
            *pos += 1;
            Ok(t.clone())
        }
        Some(t) => Err(Error::TokenStream {
            index: *pos,
            message: format!("expected a label, found \"{t}\""),
        }),
        None => Err(Error::TokenStream {
            index: *pos,
            message: "expected a label, found end of tokens".into(),
        }),
    }
}

fn emit_parsed(node: &ParsedNode, parent: Option<NodeId>, builder: &mut TreeBuilder) {
    let kind = if node.children.is_empty() {
        NodeKind::Terminal
    } else {
        NodeKind::Nonterminal
    };
    let id = builder.add(parent, node.label.clone(), kind);
    for child in &node.children {
        emit_parsed(child, Some(id), builder);
    }
}

/// Binary tree in left-child right-sibling form. Node ids mirror the
/// source tree's pre-order ids.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTree {
    nodes: Vec<BinaryNode>,
    root: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryNode {
    pub label: String,
    pub kind: NodeKind,
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl BinaryTree {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &BinaryNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Left-child right-sibling transform: left points to the first child,
/// right to the next sibling. The root has no right child.
pub fn lcrs_transform(sst: &SstTree) -> BinaryTree {
    let nodes = sst
        .pre_order()
        .map(|id| {
            let node = sst.node(id);
            let left = node.children.first().copied();
            let right = sst.parent(id).and_then(|p| {
                let siblings = sst.children(p);
                let at = siblings.iter().position(|&s| s == id).expect("child listed under parent");
                siblings.get(at + 1).copied()
            });
            BinaryNode {
                label: node.label.clone(),
                kind: node.kind,
                left,
                right,
            }
        })
        .collect();
    BinaryTree {
        nodes,
        root: sst.root(),
    }
}

/// Invert [`lcrs_transform`]: left chains become child lists again.
pub fn lcrs_inverse(bin: &BinaryTree) -> Tree {
    assert!(bin.node(bin.root).right.is_none(), "root must have no right sibling");
    let mut builder = TreeBuilder::new();
    lcrs_inverse_emit(bin, bin.root, None, &mut builder);
    builder.finish()
}

fn lcrs_inverse_emit(bin: &BinaryTree, id: usize, parent: Option<NodeId>, builder: &mut TreeBuilder) {
    let node = bin.node(id);
    let new_id = builder.add(parent, node.label.clone(), node.kind);
    let mut child = node.left;
    while let Some(c) = child {
        lcrs_inverse_emit(bin, c, Some(new_id), builder);
        child = bin.node(c).right;
    }
}

/// In-order serialization of the LCRS binary tree:
/// `(` left `)` label `(` right `)`, with empty subtrees keeping their
/// bracket pair. Covers every label but only parent-to-first-child links.
pub fn lcrs_serialize(sst: &SstTree) -> SerializedSeq {
    let bin = lcrs_transform(sst);
    let mut tokens = Vec::with_capacity(5 * sst.len());
    lcrs_tokens(&bin, bin.root(), &mut tokens);

    let mut footprint = CoverageFootprint::empty(sst);
    for id in sst.pre_order() {
        if let Some(&first) = sst.children(id).first() {
            footprint.covered_links.insert((id, first));
        }
    }
    footprint
        .covered_labels
        .extend(sst.unique_labels().into_iter().map(str::to_string));
    SerializedSeq {
        tokens,
        footprint,
        method: Method::Lcrs,
    }
}

fn lcrs_tokens(bin: &BinaryTree, id: usize, out: &mut Vec<String>) {
    let node = bin.node(id);
    out.push("(".to_string());
    if let Some(left) = node.left {
        lcrs_tokens(bin, left, out);
    }
    out.push(")".to_string());
    out.push(node.label.clone());
    out.push("(".to_string());
    if let Some(right) = node.right {
        lcrs_tokens(bin, right, out);
    }
    out.push(")".to_string());
}

/// Rebuild a tree from its LCRS token sequence.
pub fn lcrs_deserialize(tokens: &[String]) -> Result<Tree> {
    let mut pos = 0;
    let mut nodes = Vec::new();
    let root = lcrs_parse(tokens, &mut pos, &mut nodes)?;
    if pos != tokens.len() {
        return Err(Error::TokenStream {
            index: pos,
            message: "trailing tokens after a complete tree".into(),
        });
    }
    if nodes[root].right.is_some() {
        return Err(Error::TokenStream {
            index: 0,
            message: "root has a right sibling".into(),
        });
    }
    let bin = BinaryTree { nodes, root };
    Ok(lcrs_inverse(&bin))
}

fn lcrs_parse(tokens: &[String], pos: &mut usize, nodes: &mut Vec<BinaryNode>) -> Result<usize> {
    expect_bracket(tokens, pos, "(")?;
    let left = if tokens.get(*pos).map(String::as_str) == Some("(") {
        Some(lcrs_parse(tokens, pos, nodes)?)
    } else {
        None
    };
    expect_bracket(tokens, pos, ")")?;
    let label = expect_label(tokens, pos)?;
    expect_bracket(tokens, pos, "(")?;
    let right = if tokens.get(*pos).map(String::as_str) == Some("(") {
        Some(lcrs_parse(tokens, pos, nodes)?)
    } else {
        None
    };
    expect_bracket(tokens, pos, ")")?;
    let kind = if left.is_some() {
        NodeKind::Nonterminal
    } else {
        NodeKind::Terminal
    };
    nodes.push(BinaryNode { label, kind, left, right });
    Ok(nodes.len() - 1)
}
