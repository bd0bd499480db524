//! Decision trees and sums of trees over weight-modifier rows.
//!
//! Routing convention: a row goes left iff `z[k] <= threshold`.

mod ensemble;
mod leaves;
mod moves;
mod prior;

pub use ensemble::{update_ensemble, EnsembleUpdateStats};
pub use leaves::{leaf_log_marginal, sample_terminal_nodes, LeafStats};
pub use moves::{grow_at, prune_at, propose_tree_move, MoveKind, ProposedMove, SplitCandidates};
pub use prior::{log_tree_prior, simulate_prior_tree, split_probability, TreePriorConfig};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::types::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub modifier: usize,
    pub threshold: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, row: &[f64]) -> bool {
        row[self.modifier] <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Internal {
        rule: SplitRule,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Terminal {
        phi: f64,
    },
}

/// Path from the root: `false` is left, `true` is right.
pub type NodePath = Vec<bool>;

impl TreeNode {
    pub fn leaf(phi: f64) -> Self {
        TreeNode::Terminal { phi }
    }

    pub fn split(modifier: usize, threshold: f64, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Internal {
            rule: SplitRule {
                modifier,
                threshold,
            },
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, TreeNode::Terminal { .. })
    }

    #[inline]
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Terminal { phi } => return *phi,
                TreeNode::Internal { rule, left, right } => {
                    node = if rule.goes_left(row) { left } else { right };
                }
            }
        }
    }

    /// Preorder index of the terminal node reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        fn go(node: &TreeNode, row: &[f64], offset: usize) -> usize {
            match node {
                TreeNode::Terminal { .. } => offset,
                TreeNode::Internal { rule, left, right } => {
                    if rule.goes_left(row) {
                        go(left, row, offset)
                    } else {
                        go(right, row, offset + left.n_terminals())
                    }
                }
            }
        }
        go(self, row, 0)
    }

    /// Leaf index for every row of `z`.
    pub fn route_rows(&self, z: &Matrix) -> Vec<usize> {
        // Flatten once so routing does not recount subtree sizes per row.
        let flat = FlatTree::new(self);
        (0..z.rows()).map(|i| flat.leaf_index(z.row(i))).collect()
    }

    pub fn n_terminals(&self) -> usize {
        match self {
            TreeNode::Terminal { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_terminals() + right.n_terminals(),
        }
    }

    pub fn n_internal(&self) -> usize {
        match self {
            TreeNode::Terminal { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.n_internal() + right.n_internal(),
        }
    }

    /// Depth of the deepest terminal; a root-only tree has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Terminal { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Terminal values in preorder.
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |n, _| {
            if let TreeNode::Terminal { phi } = n {
                out.push(*phi);
            }
        });
        out
    }

    /// Overwrites terminal values in preorder.
    pub fn set_leaf_values(&mut self, values: &[f64]) {
        fn go(node: &mut TreeNode, values: &[f64], next: &mut usize) {
            match node {
                TreeNode::Terminal { phi } => {
                    *phi = values[*next];
                    *next += 1;
                }
                TreeNode::Internal { left, right, .. } => {
                    go(left, values, next);
                    go(right, values, next);
                }
            }
        }
        let mut next = 0;
        go(self, values, &mut next);
    }

    /// Calls `f(node, depth)` in preorder.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode, usize)) {
        fn go<'a>(node: &'a TreeNode, depth: usize, f: &mut impl FnMut(&'a TreeNode, usize)) {
            f(node, depth);
            if let TreeNode::Internal { left, right, .. } = node {
                go(left, depth + 1, f);
                go(right, depth + 1, f);
            }
        }
        go(self, 0, f)
    }

    /// Paths of all terminal nodes, preorder.
    pub fn terminal_paths(&self) -> Vec<NodePath> {
        let mut out = Vec::new();
        collect_paths(self, &mut Vec::new(), &mut out, &|n| n.is_terminal());
        out
    }

    pub fn internal_paths(&self) -> Vec<NodePath> {
        let mut out = Vec::new();
        collect_paths(self, &mut Vec::new(), &mut out, &|n| !n.is_terminal());
        out
    }

    /// Internal nodes whose children are both terminal.
    pub fn prunable_paths(&self) -> Vec<NodePath> {
        let mut out = Vec::new();
        collect_paths(self, &mut Vec::new(), &mut out, &|n| match n {
            TreeNode::Internal { left, right, .. } => left.is_terminal() && right.is_terminal(),
            TreeNode::Terminal { .. } => false,
        });
        out
    }

    pub fn node_at(&self, path: &[bool]) -> &TreeNode {
        let mut node = self;
        for go_right in path {
            node = match node {
                TreeNode::Internal { left, right, .. } => {
                    if *go_right {
                        right
                    } else {
                        left
                    }
                }
                TreeNode::Terminal { .. } => panic!("path runs past a terminal node"),
            };
        }
        node
    }

    pub fn node_at_mut(&mut self, path: &[bool]) -> &mut TreeNode {
        let mut node = self;
        for go_right in path {
            node = match node {
                TreeNode::Internal { left, right, .. } => {
                    if *go_right {
                        right
                    } else {
                        left
                    }
                }
                TreeNode::Terminal { .. } => panic!("path runs past a terminal node"),
            };
        }
        node
    }

    /// Adds one to `counts[k]` for every internal node splitting on modifier `k`.
    pub fn add_split_counts(&self, counts: &mut [usize]) {
        self.visit(&mut |n, _| {
            if let TreeNode::Internal { rule, .. } = n {
                if let Some(c) = counts.get_mut(rule.modifier) {
                    *c += 1;
                }
            }
        });
    }
}

fn collect_paths(
    node: &TreeNode,
    path: &mut NodePath,
    out: &mut Vec<NodePath>,
    pred: &dyn Fn(&TreeNode) -> bool,
) {
    if pred(node) {
        out.push(path.clone());
    }
    if let TreeNode::Internal { left, right, .. } = node {
        path.push(false);
        collect_paths(left, path, out, pred);
        path.pop();
        path.push(true);
        collect_paths(right, path, out, pred);
        path.pop();
    }
}

/// Array form of a tree for fast routing.
struct FlatTree {
    // (modifier, threshold, left, right) for internal nodes; leaves have left == usize::MAX
    nodes: Vec<(usize, f64, usize, usize)>,
}

impl FlatTree {
    fn new(root: &TreeNode) -> Self {
        fn go(node: &TreeNode, nodes: &mut Vec<(usize, f64, usize, usize)>, leaf: &mut usize) -> usize {
            let id = nodes.len();
            match node {
                TreeNode::Terminal { .. } => {
                    nodes.push((*leaf, 0.0, usize::MAX, usize::MAX));
                    *leaf += 1;
                }
                TreeNode::Internal { rule, left, right } => {
                    nodes.push((rule.modifier, rule.threshold, 0, 0));
                    let l = go(left, nodes, leaf);
                    let r = go(right, nodes, leaf);
                    nodes[id].2 = l;
                    nodes[id].3 = r;
                }
            }
            id
        }
        let mut nodes = Vec::new();
        let mut leaf = 0;
        go(root, &mut nodes, &mut leaf);
        Self { nodes }
    }

    #[inline]
    fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let (k, d, l, r) = self.nodes[i];
            if l == usize::MAX {
                return k;
            }
            i = if row[k] <= d { l } else { r };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleTarget {
    Gamma,
    Beta,
}

/// `S` trees whose terminal values add up to a prior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<TreeNode>,
    pub target: EnsembleTarget,
    pub n_modifiers: usize,
}

impl TreeEnsemble {
    /// `n_trees` root-only trees with value zero.
    pub fn root_only(n_trees: usize, target: EnsembleTarget, n_modifiers: usize) -> Self {
        Self {
            trees: vec![TreeNode::leaf(0.0); n_trees.max(1)],
            target,
            n_modifiers,
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn evaluate(&self, z_row: &[f64]) -> Result<f64> {
        if z_row.len() != self.n_modifiers {
            return Err(invalid(format!(
                "modifier row has {} entries, ensemble was grown on {}",
                z_row.len(),
                self.n_modifiers
            )));
        }
        Ok(self.evaluate_unchecked(z_row))
    }

    #[inline]
    pub fn evaluate_unchecked(&self, z_row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.evaluate(z_row)).sum()
    }

    /// Ensemble value for each row of `z`.
    pub fn evaluate_rows(&self, z: &Matrix) -> Vec<f64> {
        let mut out = vec![0.0; z.rows()];
        for tree in &self.trees {
            let flat = FlatTree::new(tree);
            let values = tree.leaf_values();
            for (i, o) in out.iter_mut().enumerate() {
                *o += values[flat.leaf_index(z.row(i))];
            }
        }
        out
    }

    pub fn total_splits(&self) -> usize {
        self.trees.iter().map(|t| t.n_internal()).sum()
    }
}

/// Internal-node count per modifier index over the whole ensemble.
pub fn count_splits_by_modifier(e: &TreeEnsemble, k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for t in &e.trees {
        t.add_split_counts(&mut counts);
    }
    counts
}
