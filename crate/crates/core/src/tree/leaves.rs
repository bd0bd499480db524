use super::prior::TreePriorConfig;
use super::TreeNode;
use crate::dist::std_normal;
use crate::error::{invalid, shape, Result};
use crate::rng::RngHandle;
use crate::types::Matrix;

/// Heteroskedastic Gaussian sufficient statistics of the rows in one leaf.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LeafStats {
    pub count: usize,
    /// `sum 1 / v_i`
    pub precision: f64,
    /// `sum r_i / v_i`
    pub weighted_sum: f64,
}

impl LeafStats {
    #[inline]
    pub fn add(&mut self, r: f64, v: f64) {
        self.count += 1;
        self.precision += 1.0 / v;
        self.weighted_sum += r / v;
    }

    /// Per-leaf statistics for rows routed by `leaf_of`.
    pub fn collect(n_leaves: usize, leaf_of: &[usize], residuals: &[f64], variances: &[f64]) -> Vec<LeafStats> {
        let mut out = vec![LeafStats::default(); n_leaves];
        for ((leaf, r), v) in leaf_of.iter().zip(residuals).zip(variances) {
            out[*leaf].add(*r, *v);
        }
        out
    }

    /// Mean and variance of the leaf value's full conditional under a `N(0, leaf_var)` prior.
    pub fn posterior(&self, leaf_var: f64) -> (f64, f64) {
        let post_prec = self.precision + 1.0 / leaf_var;
        (self.weighted_sum / post_prec, 1.0 / post_prec)
    }
}

/// Log marginal likelihood of a leaf's rows with its value integrated out,
/// dropping the terms that do not depend on the partition.
pub fn leaf_log_marginal(stats: &LeafStats, leaf_var: f64) -> f64 {
    let post_prec = stats.precision + 1.0 / leaf_var;
    -0.5 * (1.0 + leaf_var * stats.precision).ln() + 0.5 * stats.weighted_sum * stats.weighted_sum / post_prec
}

/// Redraws every terminal value from its conjugate full conditional.
/// `residuals` and `variances` are aligned with the rows of `z`; leaves that
/// receive no rows draw from the prior.
pub fn sample_terminal_nodes(
    root: &TreeNode,
    z: &Matrix,
    residuals: &[f64],
    variances: &[f64],
    cfg: &TreePriorConfig,
    n_trees: usize,
    rng: &mut RngHandle,
) -> Result<TreeNode> {
    if residuals.len() != z.rows() || variances.len() != z.rows() {
        return Err(shape("residuals and variances must align with modifier rows"));
    }
    if let Some(i) = variances.iter().position(|v| !(*v > 0.0)) {
        return Err(invalid(format!("residual variance at row {i} must be positive")));
    }
    let leaf_of = root.route_rows(z);
    let stats = LeafStats::collect(root.n_terminals(), &leaf_of, residuals, variances);
    Ok(redraw_leaves(root, &stats, cfg.leaf_variance(n_trees), rng))
}

pub(crate) fn redraw_leaves(root: &TreeNode, stats: &[LeafStats], leaf_var: f64, rng: &mut RngHandle) -> TreeNode {
    let values: Vec<f64> = stats
        .iter()
        .map(|s| {
            let (m, v) = s.posterior(leaf_var);
            m + v.sqrt() * std_normal(rng)
        })
        .collect();
    let mut out = root.clone();
    out.set_leaf_values(&values);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_tree_draws_from_prior() {
        let cfg = TreePriorConfig::default();
        let s = 4;
        let z = Matrix::zeros(0, 1);
        let mut rng = RngHandle::new(21, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_terminal_nodes(&TreeNode::leaf(0.0), &z, &[], &[], &cfg, s, &mut rng).unwrap().leaf_values()[0])
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let target = cfg.c2 / s as f64;
        let se = target * (2.0 / n as f64).sqrt();
        assert!((v - target).abs() < 3.0 * se, "var {v} target {target}");
    }

    #[test]
    fn single_leaf_posterior_mean_closed_form() {
        let cfg = TreePriorConfig::default();
        let (n, sigma2, r, s) = (25usize, 0.5, 0.8, 3usize);
        let stats = LeafStats::collect(1, &vec![0; n], &vec![r; n], &vec![sigma2; n]);
        let (m, _) = stats[0].posterior(cfg.leaf_variance(s));
        let expected = r * n as f64 / sigma2 / (n as f64 / sigma2 + s as f64 / cfg.c2);
        assert!((m - expected).abs() < 1e-12);
    }

    #[test]
    fn huge_variance_returns_prior() {
        let stats = LeafStats::collect(1, &[0, 0, 0], &[5.0, 5.0, 5.0], &[1e300, 1e300, 1e300]);
        let (m, v) = stats[0].posterior(0.1);
        assert!(m.abs() < 1e-290);
        assert!((v - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_variances() {
        let z = Matrix::zeros(2, 1);
        let mut rng = RngHandle::new(0, 0);
        let r = sample_terminal_nodes(&TreeNode::leaf(0.0), &z, &[0.0, 0.0], &[1.0, 0.0], &TreePriorConfig::default(), 1, &mut rng);
        assert!(r.is_err());
    }

    // log marginal from the closed form equals brute-force quadrature over the leaf value
    #[test]
    fn marginal_matches_quadrature() {
        let r = [0.3, -0.1, 0.7];
        let v = [0.5, 1.5, 0.2];
        let leaf_var = 0.4;
        let stats = LeafStats::collect(1, &[0, 0, 0], &r, &v);
        let closed = leaf_log_marginal(&stats[0], leaf_var);
        // integral over phi of prod N(r|phi,v) N(phi|0,leaf_var), divided by prod N(r|0,v)
        let h = 1e-4;
        let mut num = 0.0;
        let mut phi = -10.0;
        while phi < 10.0 {
            let mut lp = crate::dist::normal_ln_pdf(phi, 0.0, leaf_var);
            for i in 0..3 {
                lp += crate::dist::normal_ln_pdf(r[i], phi, v[i]) - crate::dist::normal_ln_pdf(r[i], 0.0, v[i]);
            }
            num += lp.exp() * h;
            phi += h;
        }
        assert!((num.ln() - closed).abs() < 1e-6, "{} vs {closed}", num.ln());
    }
}
