//! GROW / PRUNE / CHANGE proposals with exact Metropolis-Hastings ratios.

use super::prior::{split_probability, TreePriorConfig};
use super::{NodePath, SplitRule, TreeNode};
use crate::rng::RngHandle;
use crate::types::Matrix;

const P_GROW: f64 = 0.4;
const P_PRUNE: f64 = 0.4;
const P_CHANGE: f64 = 0.2;

/// Admissible splitting rules: for each modifier, its distinct observed
/// values except the largest (a split there would leave the right side empty).
#[derive(Debug, Clone)]
pub struct SplitCandidates {
    thresholds: Vec<Vec<f64>>,
    usable: Vec<usize>,
}

impl SplitCandidates {
    pub fn from_matrix(z: &Matrix) -> Self {
        let thresholds: Vec<Vec<f64>> = (0..z.cols())
            .map(|k| {
                let mut v = z.column(k);
                v.retain(|x| x.is_finite());
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.pop();
                v
            })
            .collect();
        let usable = (0..thresholds.len())
            .filter(|k| !thresholds[*k].is_empty())
            .collect();
        Self { thresholds, usable }
    }

    pub fn n_modifiers(&self) -> usize {
        self.thresholds.len()
    }

    /// Whether at least one modifier can be split on.
    pub fn any(&self) -> bool {
        !self.usable.is_empty()
    }

    /// Log probability of drawing a rule on modifier `k` under the uniform
    /// variable / uniform observed-value rule prior.
    pub fn log_rule_probability(&self, k: usize) -> f64 {
        let n_k = self.thresholds.get(k).map_or(0, |t| t.len());
        if n_k == 0 || self.usable.is_empty() {
            return f64::NEG_INFINITY;
        }
        -(self.usable.len() as f64).ln() - (n_k as f64).ln()
    }

    pub fn draw_rule(&self, rng: &mut RngHandle) -> SplitRule {
        let k = self.usable[rng.below(self.usable.len())];
        let t = &self.thresholds[k];
        SplitRule {
            modifier: k,
            threshold: t[rng.below(t.len())],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
}

#[derive(Debug, Clone)]
pub struct ProposedMove {
    pub kind: MoveKind,
    pub tree: TreeNode,
    /// Node that was grown, pruned or changed.
    pub path: NodePath,
    /// `ln q(T' -> T) - ln q(T -> T')`.
    pub log_proposal_ratio: f64,
    /// `ln p(T') - ln p(T)` for structure and rules.
    pub log_prior_ratio: f64,
}

impl ProposedMove {
    pub fn log_ratio(&self) -> f64 {
        self.log_proposal_ratio + self.log_prior_ratio
    }
}

/// (grow, prune, change) probabilities among the moves feasible on `tree`.
fn move_probabilities(tree: &TreeNode, cands: &SplitCandidates) -> (f64, f64, f64) {
    let g = if cands.any() { P_GROW } else { 0.0 };
    let p = if tree.prunable_paths().is_empty() {
        0.0
    } else {
        P_PRUNE
    };
    let c = if cands.any() && !tree.is_terminal() {
        P_CHANGE
    } else {
        0.0
    };
    let total = g + p + c;
    if total == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    (g / total, p / total, c / total)
}

/// Draws one move. `None` when no move is feasible (a root-only tree and no
/// splittable modifier). Infeasible move types are resampled by renormalizing
/// over the feasible ones, and the ratios account for that.
pub fn propose_tree_move(
    root: &TreeNode,
    cands: &SplitCandidates,
    cfg: &TreePriorConfig,
    rng: &mut RngHandle,
) -> Option<ProposedMove> {
    let (pg, pp, pc) = move_probabilities(root, cands);
    if pg + pp + pc == 0.0 {
        return None;
    }
    let u = rng.uniform();
    if u < pg {
        let terminals = root.terminal_paths();
        let path = terminals[rng.below(terminals.len())].clone();
        let rule = cands.draw_rule(rng);
        Some(grow_at(root, &path, rule, cands, cfg))
    } else if u < pg + pp {
        let prunable = root.prunable_paths();
        let path = prunable[rng.below(prunable.len())].clone();
        Some(prune_at(root, &path, cands, cfg))
    } else {
        let internal = root.internal_paths();
        let path = internal[rng.below(internal.len())].clone();
        let rule = cands.draw_rule(rng);
        let mut tree = root.clone();
        if let TreeNode::Internal { rule: r, .. } = tree.node_at_mut(&path) {
            *r = rule;
        }
        // same structure and uniform rule prior: both ratios vanish
        Some(ProposedMove {
            kind: MoveKind::Change,
            tree,
            path,
            log_proposal_ratio: 0.0,
            log_prior_ratio: 0.0,
        })
    }
}

fn grow_prior_ratio(depth: usize, modifier: usize, cands: &SplitCandidates, cfg: &TreePriorConfig) -> f64 {
    let p = split_probability(depth, cfg);
    let p_child = split_probability(depth + 1, cfg);
    p.ln() + 2.0 * (1.0 - p_child).ln() - (1.0 - p).ln() + cands.log_rule_probability(modifier)
}

/// GROW at the terminal node `path`, with exact ratios. Both children
/// inherit the parent's terminal value.
pub fn grow_at(
    root: &TreeNode,
    path: &[bool],
    rule: SplitRule,
    cands: &SplitCandidates,
    cfg: &TreePriorConfig,
) -> ProposedMove {
    let mut tree = root.clone();
    let node = tree.node_at_mut(path);
    let phi = match node {
        TreeNode::Terminal { phi } => *phi,
        TreeNode::Internal { .. } => panic!("grow_at on an internal node"),
    };
    *node = TreeNode::Internal {
        rule,
        left: Box::new(TreeNode::leaf(phi)),
        right: Box::new(TreeNode::leaf(phi)),
    };
    let (pg_before, _, _) = move_probabilities(root, cands);
    let (_, pp_after, _) = move_probabilities(&tree, cands);
    let log_forward = pg_before.ln() - (root.n_terminals() as f64).ln()
        + cands.log_rule_probability(rule.modifier);
    let log_reverse = pp_after.ln() - (tree.prunable_paths().len() as f64).ln();
    ProposedMove {
        kind: MoveKind::Grow,
        tree,
        path: path.to_vec(),
        log_proposal_ratio: log_reverse - log_forward,
        log_prior_ratio: grow_prior_ratio(path.len(), rule.modifier, cands, cfg),
    }
}

/// PRUNE the internal node `path` whose children are both terminal. The
/// new terminal takes the mean of the two children's values.
pub fn prune_at(
    root: &TreeNode,
    path: &[bool],
    cands: &SplitCandidates,
    cfg: &TreePriorConfig,
) -> ProposedMove {
    let mut tree = root.clone();
    let node = tree.node_at_mut(path);
    let (rule, phi) = match node {
        TreeNode::Internal { rule, left, right } => match (left.as_ref(), right.as_ref()) {
            (TreeNode::Terminal { phi: a }, TreeNode::Terminal { phi: b }) => (*rule, 0.5 * (a + b)),
            _ => panic!("prune_at on a node without two terminal children"),
        },
        TreeNode::Terminal { .. } => panic!("prune_at on a terminal node"),
    };
    *node = TreeNode::leaf(phi);
    let (_, pp_before, _) = move_probabilities(root, cands);
    let (pg_after, _, _) = move_probabilities(&tree, cands);
    let log_forward = pp_before.ln() - (root.prunable_paths().len() as f64).ln();
    let log_reverse = pg_after.ln() - (tree.n_terminals() as f64).ln()
        + cands.log_rule_probability(rule.modifier);
    ProposedMove {
        kind: MoveKind::Prune,
        tree,
        path: path.to_vec(),
        log_proposal_ratio: log_reverse - log_forward,
        log_prior_ratio: -grow_prior_ratio(path.len(), rule.modifier, cands, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::tests::worked_example_tree;

    fn cands(rows: usize, cols: usize) -> SplitCandidates {
        let z = Matrix::from_rows(
            rows,
            cols,
            (0..rows * cols).map(|i| ((i * 37) % 101) as f64).collect(),
        )
        .unwrap();
        SplitCandidates::from_matrix(&z)
    }

    #[test]
    fn grow_on_root_gives_two_terminals() {
        let c = cands(50, 3);
        let cfg = TreePriorConfig::default();
        let mut rng = RngHandle::new(3, 0);
        for _ in 0..100 {
            let m = propose_tree_move(&TreeNode::leaf(0.0), &c, &cfg, &mut rng).unwrap();
            assert_eq!(m.kind, MoveKind::Grow);
            assert_eq!(m.tree.n_terminals(), 2);
        }
    }

    #[test]
    fn no_move_without_splittable_modifier() {
        let z = Matrix::from_rows(4, 1, vec![1.0; 4]).unwrap();
        let c = SplitCandidates::from_matrix(&z);
        let mut rng = RngHandle::new(3, 0);
        assert!(propose_tree_move(&TreeNode::leaf(0.0), &c, &TreePriorConfig::default(), &mut rng).is_none());
    }

    #[test]
    fn grow_then_prune_ratios_cancel() {
        let c = cands(80, 3);
        let cfg = TreePriorConfig::default();
        let mut rng = RngHandle::new(5, 0);
        let mut trees = vec![TreeNode::leaf(0.0), worked_example_tree()];
        for _ in 0..20 {
            let t = trees.last().unwrap().clone();
            let paths = t.terminal_paths();
            let p = paths[rng.below(paths.len())].clone();
            trees.push(grow_at(&t, &p, c.draw_rule(&mut rng), &c, &cfg).tree);
        }
        for t in &trees {
            for p in t.terminal_paths() {
                let rule = c.draw_rule(&mut rng);
                let g = grow_at(t, &p, rule, &c, &cfg);
                let back = prune_at(&g.tree, &p, &c, &cfg);
                assert!((g.log_proposal_ratio + back.log_proposal_ratio).abs() < 1e-12);
                assert!((g.log_prior_ratio + back.log_prior_ratio).abs() < 1e-12);
                assert_eq!(back.tree.n_terminals(), t.n_terminals());
            }
        }
    }

    // With a vanishing split probability a prior-only chain stays at the root.
    #[test]
    fn tiny_c0_concentrates_on_root() {
        let c = cands(60, 2);
        let cfg = TreePriorConfig {
            c0: 1e-6,
            ..TreePriorConfig::default()
        };
        let mut rng = RngHandle::new(9, 0);
        let mut tree = TreeNode::leaf(0.0);
        let mut root_only = 0;
        let n = 10_000;
        for _ in 0..n {
            if let Some(m) = propose_tree_move(&tree, &c, &cfg, &mut rng) {
                if rng.uniform().ln() < m.log_ratio() {
                    tree = m.tree;
                }
            }
            if tree.is_terminal() {
                root_only += 1;
            }
        }
        assert!(root_only as f64 / n as f64 > 0.99);
    }
}
