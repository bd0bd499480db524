use serde::{Deserialize, Serialize};

use super::moves::SplitCandidates;
use super::TreeNode;
use crate::error::{invalid, Result};
use crate::rng::RngHandle;

/// Tree-generating prior: a node at depth `d` splits with probability
/// `c0 / (1 + d)^c1`; terminal values are `N(0, c2 / S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreePriorConfig {
    pub c0: f64,
    pub c1: f64,
    /// Variance of the whole ensemble's value under the prior.
    pub c2: f64,
}

/// Ensemble prior sd of 1/3, so that +-3 sd covers a weight range of width 2.
pub const DEFAULT_C2: f64 = 1.0 / 9.0;

impl Default for TreePriorConfig {
    fn default() -> Self {
        Self {
            c0: 0.95,
            c1: 2.0,
            c2: DEFAULT_C2,
        }
    }
}

impl TreePriorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 >= 0.0 && self.c0 < 1.0) {
            return Err(invalid(format!("c0 = {} outside [0, 1)", self.c0)));
        }
        if !(self.c1 >= 0.0) {
            return Err(invalid(format!("c1 = {} must be nonnegative", self.c1)));
        }
        if !(self.c2 > 0.0) {
            return Err(invalid(format!("c2 = {} must be positive", self.c2)));
        }
        Ok(())
    }

    /// Prior variance of one tree's terminal value in an ensemble of `s` trees.
    pub fn leaf_variance(&self, s: usize) -> f64 {
        self.c2 / s.max(1) as f64
    }
}

pub fn split_probability(depth: usize, cfg: &TreePriorConfig) -> f64 {
    cfg.c0 / (1.0 + depth as f64).powf(cfg.c1)
}

/// Log prior of the tree structure and splitting rules (terminal values excluded).
pub fn log_tree_prior(tree: &TreeNode, cfg: &TreePriorConfig, cands: &SplitCandidates) -> f64 {
    let mut lp = 0.0;
    tree.visit(&mut |node, depth| {
        let p = split_probability(depth, cfg);
        match node {
            TreeNode::Terminal { .. } => lp += (1.0 - p).ln(),
            TreeNode::Internal { rule, .. } => lp += p.ln() + cands.log_rule_probability(rule.modifier),
        }
    });
    lp
}

/// Direct simulation from the structure prior. Terminal values are zero.
/// Growth stops at `max_depth` as a guard; with the default prior that
/// depth is essentially never reached.
pub fn simulate_prior_tree(
    cfg: &TreePriorConfig,
    cands: &SplitCandidates,
    max_depth: usize,
    rng: &mut RngHandle,
) -> TreeNode {
    fn grow(
        depth: usize,
        cfg: &TreePriorConfig,
        cands: &SplitCandidates,
        max_depth: usize,
        rng: &mut RngHandle,
    ) -> TreeNode {
        if depth >= max_depth || !cands.any() || rng.uniform() >= split_probability(depth, cfg) {
            return TreeNode::leaf(0.0);
        }
        let rule = cands.draw_rule(rng);
        TreeNode::Internal {
            rule,
            left: Box::new(grow(depth + 1, cfg, cands, max_depth, rng)),
            right: Box::new(grow(depth + 1, cfg, cands, max_depth, rng)),
        }
    }
    grow(0, cfg, cands, max_depth, rng)
}
