//! Simplified Semantic Trees: rule-driven prune/relabel/unify passes over
//! an AST.
//!
//! A rule file is `{"prune": [..], "relabel": {..}, "unify": {..}}`. Label
//! matchers are exact strings plus an optional suffix wildcard (`"*_Stmt"`
//! matches any label ending in `_Stmt`), which also covers string-literal
//! terminals via `"*\""`. Passes run in the fixed order prune, relabel,
//! unify; pruning removes the whole subtree under a matched node.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::ast::{AstTree, NodeId, SstTree, TreeBuilder};
use crate::error::{Error, Result};

/// Prune/relabel/unify rules for one language.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformRuleSet {
    #[serde(default)]
    pub prune: BTreeSet<String>,
    #[serde(default)]
    pub relabel: BTreeMap<String, String>,
    #[serde(default)]
    pub unify: BTreeMap<String, String>,
}

fn matcher_hits(pattern: &str, label: &str) -> bool {
    match pattern.strip_prefix('*') {
        // a bare "*" is the multiplication label, not a wildcard
        Some(suffix) if !suffix.is_empty() => label.ends_with(suffix),
        _ => pattern == label,
    }
}

fn map_lookup<'a>(map: &'a BTreeMap<String, String>, label: &str) -> Option<&'a str> {
    if let Some(target) = map.get(label) {
        return Some(target);
    }
    map.iter()
        .find(|(pattern, _)| pattern.len() > 1 && pattern.starts_with('*') && matcher_hits(pattern, label))
        .map(|(_, target)| target.as_str())
}

impl TransformRuleSet {
    /// Identity rule set: [`to_sst`] copies the tree unchanged.
    pub fn identity() -> Self {
        Self::default()
    }

    /// Built-in defaults for MiniLang: punctuation, structural keywords,
    /// and `self` are pruned; statement and expression labels become
    /// cross-language tags; string literals become `literal`.
    pub fn minilang_defaults() -> Self {
        let prune = [
            "self", "(", ")", "{", "}", ":", ",", ".", "=", "+", "-", "*", "/", "%", "<", ">",
            "<=", ">=", "==", "!=", "def", "for", "in", "while", "if", "else", "return",
        ];
        let relabel = [
            ("for_statement", "loop"),
            ("while_statement", "loop"),
            ("if_statement", "conditional"),
            ("binary_op", "operation"),
            ("string", "literal"),
            ("*\"", "literal"),
            ("*'", "literal"),
        ];
        let unify = [
            ("function", "module"),
            ("program", "module"),
            ("define", "module"),
        ];
        TransformRuleSet {
            prune: prune.iter().map(|s| s.to_string()).collect(),
            relabel: relabel.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            unify: unify.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Built-in defaults by language name, if any.
    pub fn defaults_for(lang: &str) -> Option<Self> {
        match lang {
            "minilang" => Some(Self::minilang_defaults()),
            _ => None,
        }
    }

    fn prune_matches(&self, label: &str) -> bool {
        self.prune.iter().any(|p| matcher_hits(p, label))
    }

    fn relabel_target(&self, label: &str) -> Option<&str> {
        map_lookup(&self.relabel, label)
    }

    fn unify_target(&self, label: &str) -> Option<&str> {
        map_lookup(&self.unify, label)
    }

    /// Rule-set hygiene: targets must be non-empty, and no target may fall
    /// back into an earlier or same pass's domain (that would make the
    /// transformation non-idempotent).
    pub fn validate(&self) -> Result<()> {
        for (pass, map) in [("relabel", &self.relabel), ("unify", &self.unify)] {
            for (pattern, target) in map {
                if target.is_empty() {
                    return Err(Error::RuleSchema(format!(
                        "{pass} target for \"{pattern}\" is empty"
                    )));
                }
                if self.prune_matches(target) {
                    return Err(Error::RuleSchema(format!(
                        "{pass} target \"{target}\" matches the prune set"
                    )));
                }
                if self.relabel_target(target).is_some() {
                    return Err(Error::RuleSchema(format!(
                        "{pass} target \"{target}\" matches a relabel rule"
                    )));
                }
                if pass == "unify" && self.unify_target(target).is_some() {
                    return Err(Error::RuleSchema(format!(
                        "unify target \"{target}\" matches a unify rule"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Load a rule file. An empty (or whitespace-only) file is the identity
/// rule set; unknown keys are rejected.
pub fn load_rules(path: impl AsRef<Path>) -> Result<TransformRuleSet> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_rules(&text)
}

/// Parse rule-file contents; see [`load_rules`].
pub fn parse_rules(text: &str) -> Result<TransformRuleSet> {
    if text.trim().is_empty() {
        return Ok(TransformRuleSet::identity());
    }
    let rules: TransformRuleSet =
        serde_json::from_str(text).map_err(|e| Error::RuleSchema(e.to_string()))?;
    rules.validate()?;
    Ok(rules)
}

/// Transform an AST into its Simplified Semantic Tree.
///
/// Pass 1 removes every node matching the prune set together with its
/// subtree (the parent always survives). Pass 2 relabels matching nodes,
/// pass 3 unifies labels. Sibling order is preserved. Pruning the root is
/// an error.
pub fn to_sst(ast: &AstTree, rules: &TransformRuleSet) -> Result<SstTree> {
    let root = ast.root();
    if rules.prune_matches(ast.label(root)) {
        return Err(Error::PruneRoot {
            label: ast.label(root).to_string(),
        });
    }
    let mut builder = TreeBuilder::new();
    copy_surviving(ast, root, None, rules, &mut builder);
    Ok(builder.finish())
}

fn copy_surviving(
    ast: &AstTree,
    id: NodeId,
    parent: Option<NodeId>,
    rules: &TransformRuleSet,
    builder: &mut TreeBuilder,
) {
    let node = ast.node(id);
    let mut label = node.label.as_str();
    if let Some(target) = rules.relabel_target(label) {
        label = target;
    }
    if let Some(target) = rules.unify_target(label) {
        label = target;
    }
    let new_id = builder.add(parent, label, node.kind);
    for &child in &node.children {
        if !rules.prune_matches(ast.label(child)) {
            copy_surviving(ast, child, Some(new_id), rules, builder);
        }
    }
}
