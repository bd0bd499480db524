use super::leaves::{leaf_log_marginal, redraw_leaves, LeafStats};
use super::moves::{propose_tree_move, MoveKind, SplitCandidates};
use super::prior::TreePriorConfig;
use super::TreeEnsemble;
use crate::error::{shape, Result};
use crate::rng::RngHandle;
use crate::types::Matrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnsembleUpdateStats {
    pub proposed: usize,
    pub accepted: usize,
    pub rejected_empty: usize,
}

/// One backfitting pass: for each tree, a structure move accepted by MH on
/// the partial residuals followed by a conjugate redraw of its terminal
/// values. `target` holds the latent responses (weights), `row_var` their
/// prior variances around the ensemble. Returns the ensemble's fitted values.
#[allow(clippy::too_many_arguments)]
pub fn update_ensemble(
    ens: &mut TreeEnsemble,
    z: &Matrix,
    cands: &SplitCandidates,
    target: &[f64],
    row_var: &[f64],
    cfg: &TreePriorConfig,
    allow_moves: bool,
    rng: &mut RngHandle,
) -> Result<(Vec<f64>, EnsembleUpdateStats)> {
    let n = z.rows();
    if target.len() != n || row_var.len() != n {
        return Err(shape("ensemble target and variances must align with modifier rows"));
    }
    let s_trees = ens.n_trees();
    let leaf_var = cfg.leaf_variance(s_trees);
    let mut stats = EnsembleUpdateStats::default();

    let mut fits: Vec<Vec<f64>> = ens
        .trees
        .iter()
        .map(|t| {
            let v = t.leaf_values();
            t.route_rows(z).into_iter().map(|l| v[l]).collect()
        })
        .collect();
    let mut total = vec![0.0; n];
    for f in &fits {
        for (t, x) in total.iter_mut().zip(f) {
            *t += x;
        }
    }

    let mut resid = vec![0.0; n];
    for s in 0..s_trees {
        for i in 0..n {
            resid[i] = target[i] - (total[i] - fits[s][i]);
        }
        let tree = &ens.trees[s];
        let leaf_of = tree.route_rows(z);
        let mut cur_stats = LeafStats::collect(tree.n_terminals(), &leaf_of, &resid, row_var);
        let mut accepted_tree = None;

        if allow_moves {
            if let Some(mv) = propose_tree_move(tree, cands, cfg, rng) {
                stats.proposed += 1;
                let new_leaf_of = mv.tree.route_rows(z);
                let new_stats = LeafStats::collect(mv.tree.n_terminals(), &new_leaf_of, &resid, row_var);
                let empty = match mv.kind {
                    // only the changed subtree can lose rows, but checking all leaves is cheap
                    MoveKind::Grow | MoveKind::Change => new_stats.iter().any(|s| s.count == 0),
                    MoveKind::Prune => false,
                };
                if empty {
                    stats.rejected_empty += 1;
                } else {
                    let ll_new: f64 = new_stats.iter().map(|s| leaf_log_marginal(s, leaf_var)).sum();
                    let ll_cur: f64 = cur_stats.iter().map(|s| leaf_log_marginal(s, leaf_var)).sum();
                    let log_alpha = ll_new - ll_cur + mv.log_ratio();
                    if rng.uniform().ln() < log_alpha {
                        stats.accepted += 1;
                        cur_stats = new_stats;
                        accepted_tree = Some((mv.tree, new_leaf_of));
                    }
                }
            }
        }

        let (structure, leaf_of) = match accepted_tree {
            Some((t, l)) => (t, l),
            None => (ens.trees[s].clone(), leaf_of),
        };
        let new_tree = redraw_leaves(&structure, &cur_stats, leaf_var, rng);
        let values = new_tree.leaf_values();
        for i in 0..n {
            let f = values[leaf_of[i]];
            total[i] += f - fits[s][i];
            fits[s][i] = f;
        }
        ens.trees[s] = new_tree;
    }
    Ok((total, stats))
}
