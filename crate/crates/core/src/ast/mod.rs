//! Ordered, labeled, rooted trees and ways to obtain them.
//!
//! Trees come from two places: the built-in MiniLang parser
//! ([`parse_minilang`]) or pre-parsed tree objects embedded in corpus files
//! ([`load_ast`]). Both produce the same arena representation with node ids
//! assigned in pre-order, which keeps link identities stable for coverage
//! footprints.

mod minilang;

pub use minilang::parse_minilang;

use serde_json::{json, Value};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::seed::fnv1a64;

/// Index into a tree's node arena.
pub type NodeId = usize;

/// Whether a node carries source text (terminal) or a grammar rule name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Terminal,
    Nonterminal,
}

impl NodeKind {
    fn as_str(self) -> &'static str {
        match self {
            NodeKind::Terminal => "terminal",
            NodeKind::Nonterminal => "nonterminal",
        }
    }
}

/// A single tree node. Terminals never have children.
#[derive(Debug, Clone)]
pub struct Node {
    pub label: String,
    pub kind: NodeKind,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
}

/// Arena tree with one root and pre-order node ids.
///
/// The same representation backs both raw ASTs and simplified semantic
/// trees; [`AstTree`] and [`SstTree`] are aliases that document intent in
/// signatures.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
    root: NodeId,
}

/// Tree as produced by a parser or loader.
pub type AstTree = Tree;
/// Tree after the prune/relabel/unify passes.
pub type SstTree = Tree;

/// Summary counts for a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeStats {
    pub node_count: usize,
    pub link_count: usize,
    pub unique_label_count: usize,
    pub leaf_count: usize,
    pub height: usize,
}

impl Tree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id].label
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Node ids in pre-order. Ids are assigned in pre-order at
    /// construction, so this is simply 0..len.
    pub fn pre_order(&self) -> impl Iterator<Item = NodeId> + '_ {
        0..self.nodes.len()
    }

    /// Leaf ids in pre-order.
    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.pre_order().filter(|&id| self.is_leaf(id))
    }

    /// Parent-child adjacencies, one per non-root node.
    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.pre_order()
            .filter_map(|id| self.nodes[id].parent.map(|p| (p, id)))
    }

    /// Distinct labels over all nodes.
    pub fn unique_labels(&self) -> BTreeSet<&str> {
        self.nodes.iter().map(|n| n.label.as_str()).collect()
    }

    /// Depth of a node: number of links from the root (root is 0).
    pub fn depth(&self, id: NodeId) -> usize {
        let mut d = 0;
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            d += 1;
            cur = p;
        }
        d
    }

    /// Content hash identifying the tree for footprint checks. Two trees
    /// with the same labels, kinds, and shape share a uid.
    pub fn uid(&self) -> u64 {
        let mut bytes = Vec::new();
        for id in self.pre_order() {
            let node = &self.nodes[id];
            bytes.extend_from_slice(node.label.as_bytes());
            bytes.push(0xff);
            bytes.push(match node.kind {
                NodeKind::Terminal => 0,
                NodeKind::Nonterminal => 1,
            });
            bytes.extend_from_slice(&(node.children.len() as u32).to_le_bytes());
        }
        fnv1a64(&bytes)
    }

    /// Convert to the external tree-object schema.
    pub fn to_value(&self) -> Value {
        self.value_of(self.root)
    }

    fn value_of(&self, id: NodeId) -> Value {
        let node = &self.nodes[id];
        json!({
            "label": node.label,
            "kind": node.kind.as_str(),
            "children": node.children.iter().map(|&c| self.value_of(c)).collect::<Vec<_>>(),
        })
    }
}

// Structural equality: labels, kinds, and child order, independent of the
// id layout the arena happens to use.
impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        let mut stack = vec![(self.root, other.root)];
        while let Some((a, b)) = stack.pop() {
            let (na, nb) = (&self.nodes[a], &other.nodes[b]);
            if na.label != nb.label
                || na.kind != nb.kind
                || na.children.len() != nb.children.len()
            {
                return false;
            }
            stack.extend(na.children.iter().copied().zip(nb.children.iter().copied()));
        }
        true
    }
}

impl Eq for Tree {}

/// Incremental tree construction. Nodes get ids in insertion order, so
/// callers that insert parents before children get pre-order ids.
#[derive(Debug, Default)]
pub struct TreeBuilder {
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a node. `parent` is `None` exactly once, for the root.
    pub fn add(&mut self, parent: Option<NodeId>, label: impl Into<String>, kind: NodeKind) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            label: label.into(),
            kind,
            children: Vec::new(),
            parent,
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    pub fn finish(self) -> Tree {
        assert!(!self.nodes.is_empty(), "tree must have a root");
        debug_assert!(self.nodes[0].parent.is_none());
        debug_assert!(self.nodes.iter().skip(1).all(|n| n.parent.is_some()));
        Tree {
            nodes: self.nodes,
            root: 0,
        }
    }
}

/// Load a tree from the external schema
/// `{"label": string, "kind": "terminal"|"nonterminal", "children": [...]}`.
///
/// Node ids are assigned in pre-order. Schema violations report the path
/// into the object.
pub fn load_ast(value: &Value) -> Result<Tree> {
    let mut builder = TreeBuilder::new();
    load_node(value, None, "$", &mut builder)?;
    Ok(builder.finish())
}

fn load_node(
    value: &Value,
    parent: Option<NodeId>,
    path: &str,
    builder: &mut TreeBuilder,
) -> Result<()> {
    let obj = value.as_object().ok_or_else(|| schema(path, "expected an object"))?;
    let label = obj
        .get("label")
        .ok_or_else(|| schema(path, "missing \"label\""))?
        .as_str()
        .ok_or_else(|| schema(path, "\"label\" must be a string"))?;
    if label.is_empty() {
        return Err(schema(path, "empty label"));
    }
    let kind = match obj
        .get("kind")
        .ok_or_else(|| schema(path, "missing \"kind\""))?
        .as_str()
    {
        Some("terminal") => NodeKind::Terminal,
        Some("nonterminal") => NodeKind::Nonterminal,
        _ => return Err(schema(path, "\"kind\" must be \"terminal\" or \"nonterminal\"")),
    };
    let children = match obj.get("children") {
        None => &[][..],
        Some(Value::Array(items)) => items.as_slice(),
        Some(_) => return Err(schema(path, "\"children\" must be an array")),
    };
    if kind == NodeKind::Terminal && !children.is_empty() {
        return Err(schema(path, "terminal node has children"));
    }
    let id = builder.add(parent, label, kind);
    for (i, child) in children.iter().enumerate() {
        let child_path = format!("{path}.children[{i}]");
        load_node(child, Some(id), &child_path, builder)?;
    }
    Ok(())
}

fn schema(path: &str, message: &str) -> Error {
    Error::TreeSchema {
        path: path.to_string(),
        message: message.to_string(),
    }
}

/// Node, link, label, leaf, and height counts.
///
/// `unique_label_count` counts nodes sharing a label as one; `height` is
/// the node count of the longest root-to-leaf path (a single node has
/// height 1).
pub fn tree_stats(tree: &Tree) -> TreeStats {
    let node_count = tree.len();
    let leaf_count = tree.leaves().count();
    let unique_label_count = tree.unique_labels().len();
    let height = tree
        .leaves()
        .map(|id| tree.depth(id) + 1)
        .max()
        .unwrap_or(0);
    TreeStats {
        node_count,
        link_count: node_count - 1,
        unique_label_count,
        leaf_count,
        height,
    }
}
