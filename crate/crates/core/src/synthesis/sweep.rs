use nalgebra::{DMatrix, DVector};

use super::density::AgentDensity;
use super::proposal::{gibbs_gaussian_agent_draws, mh_update_agent_draws};
use super::{AgentDensityMode, SynthesisData, SynthesisKind, SynthesisSpec, SynthesisState};
use crate::dist::std_normal;
use crate::error::{BpsError, Result};
use crate::rng::{RngHandle, Step};
use crate::shrinkage::{gibbs_update_horseshoe, DeviationStats};
use crate::statespace::{
    ffbs_intercept, ffbs_rw_regression, gibbs_update_sigma2_c, mh_variance_gamma_prior, sv_update, RwRegressionPrior,
    INTERCEPT_INIT,
};
use crate::tree::{propose_tree_move, update_ensemble, MoveKind, SplitCandidates, TreeEnsemble, TreePriorConfig};
use crate::types::Matrix;

/// One stream per sampling step of a chain.
#[derive(Debug, Clone)]
pub struct SweepRngs {
    pub intercept: RngHandle,
    pub intercept_var: RngHandle,
    pub gamma: RngHandle,
    pub beta: RngHandle,
    pub volatility: RngHandle,
    pub agent_draws: RngHandle,
    pub trees_gamma: RngHandle,
    pub trees_beta: RngHandle,
    pub hs_gamma: RngHandle,
    pub hs_beta: RngHandle,
    pub rw_var: RngHandle,
}

impl SweepRngs {
    pub fn new(seed: u64, chain: u32) -> Self {
        let r = |s| RngHandle::for_step(seed, chain, s);
        Self {
            intercept: r(Step::Intercept),
            intercept_var: r(Step::InterceptVariance),
            gamma: r(Step::Gamma),
            beta: r(Step::Beta),
            volatility: r(Step::Volatility),
            agent_draws: r(Step::AgentDraws),
            trees_gamma: r(Step::TreesGamma),
            trees_beta: r(Step::TreesBeta),
            hs_gamma: r(Step::HorseshoeGamma),
            hs_beta: r(Step::HorseshoeBeta),
            rw_var: r(Step::RwVariance),
        }
    }
}

fn check_finite(values: &[f64], step: &'static str) -> Result<()> {
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(BpsError::Numerical {
            iteration: 0,
            step,
            index,
            message: format!("non-finite value {}", values[index]),
        });
    }
    Ok(())
}

/// One sweep over all blocks, in order: intercept, `γ`, `β`, volatility,
/// agent draws, trees (followed by a `β` redraw), horseshoe scales.
pub fn gibbs_sweep(
    s: &mut SynthesisState,
    data: &SynthesisData,
    densities: &[AgentDensity],
    spec: &SynthesisSpec,
    rngs: &mut SweepRngs,
) -> Result<()> {
    let y = &data.y;
    let t_len = data.t_len();
    let j = data.n_agents();
    let fixed = spec.fixed;

    if !fixed.intercept {
        let var = s.sv.variances();
        let resid: Vec<f64> = s
            .residuals(y)
            .iter()
            .zip(&s.intercept.c)
            .map(|(r, c)| r + c)
            .collect();
        s.intercept.c = ffbs_intercept(&resid, &var, s.intercept.sigma2_c, INTERCEPT_INIT, &mut rngs.intercept)?;
        check_finite(&s.intercept.c, "intercept")?;
        s.intercept.sigma2_c =
            gibbs_update_sigma2_c(&s.intercept.c, s.intercept.sigma2_c, spec.sigma2_c_prior, &mut rngs.intercept_var)?;
    }

    if !spec.fix_gamma_zero && !fixed.gamma {
        draw_gamma(s, data, spec, &mut rngs.gamma)?;
        check_finite(&s.gamma, "gamma")?;
    }

    if !fixed.beta {
        match spec.kind {
            SynthesisKind::Const => {}
            SynthesisKind::Rw => rw_sweep_beta(s, data, spec, rngs)?,
            SynthesisKind::Rt => draw_beta_rt(s, data, spec, &mut rngs.beta),
        }
        check_finite(&s.beta, "beta")?;
    }

    if !fixed.volatility {
        let resid = s.residuals(y);
        s.sv = sv_update(&resid, &s.sv, &spec.sv_priors, &mut rngs.volatility)?;
        check_finite(&s.sv.log_vol, "volatility")?;
    }

    if !fixed.agent_draws {
        let var = s.sv.variances();
        for t in 0..t_len {
            let w: Vec<f64> = (0..j).map(|a| s.weight(t, a)).collect();
            let resid = y[t] - s.intercept.c[t];
            let dens = &densities[t * j..(t + 1) * j];
            let gauss: Option<Vec<(f64, f64)>> = if spec.agent_density == AgentDensityMode::Analytic {
                dens.iter().map(|d| d.gaussian()).collect()
            } else {
                None
            };
            let xt = &mut s.x[t * j..(t + 1) * j];
            match gauss {
                Some(g) => xt.copy_from_slice(&gibbs_gaussian_agent_draws(&w, resid, var[t], &g, &mut rngs.agent_draws)),
                None => {
                    mh_update_agent_draws(xt, &w, resid, var[t], dens, &mut s.proposals[t], &mut rngs.agent_draws);
                }
            }
        }
        check_finite(&s.x, "agent_draws")?;
    }

    if !fixed.trees {
        if let Some(ens) = s.trees_gamma.as_mut() {
            let cands = SplitCandidates::from_matrix(&data.z_gamma);
            let tau = match (&s.hs_gamma, spec.pinned_tau_gamma) {
                (_, Some(t)) => vec![t; j],
                (Some(h), None) => h.taus(),
                (None, None) => vec![1.0; j],
            };
            let (fit, _) = update_ensemble(
                ens,
                &data.z_gamma,
                &cands,
                &s.gamma,
                &tau,
                &spec.tree_prior,
                data.z_gamma.cols() > 0,
                &mut rngs.trees_gamma,
            )?;
            s.mu_gamma = fit;
        }
        if let Some(ens) = s.trees_beta.as_mut() {
            let base = partial_residuals_without_beta((&s.gamma, &s.intercept.c, &s.x), y, j);
            let var = s.sv.variances();
            let tau = match (&s.hs_beta, spec.pinned_tau_beta) {
                (_, Some(t)) => vec![t; j],
                (Some(h), None) => h.taus(),
                (None, None) => vec![0.0; j],
            };
            let cands = SplitCandidates::from_matrix(&data.z_beta);
            s.mu_beta = update_beta_trees_collapsed(
                ens,
                &data.z_beta,
                &cands,
                &base,
                &s.x,
                &var,
                &tau,
                &spec.tree_prior,
                data.z_beta.cols() > 0,
                &mut rngs.trees_beta,
            )?;
            check_finite(&s.mu_beta, "trees_beta")?;
            if !fixed.beta {
                draw_beta_rt(s, data, spec, &mut rngs.beta);
            }
        }
    }

    if !fixed.horseshoe {
        if let Some(hs) = &s.hs_gamma {
            let devs: Vec<DeviationStats> = (0..j)
                .map(|a| DeviationStats::single(s.gamma[a] - s.mu_gamma[a]))
                .collect();
            s.hs_gamma = Some(gibbs_update_horseshoe(hs, &devs, &mut rngs.hs_gamma)?);
        }
        if let Some(hs) = &s.hs_beta {
            let devs: Vec<DeviationStats> = (0..j)
                .map(|a| {
                    let d: Vec<f64> = (0..t_len).map(|t| s.beta[t * j + a] - s.mu_beta[t * j + a]).collect();
                    DeviationStats::pooled(&d)
                })
                .collect();
            s.hs_beta = Some(gibbs_update_horseshoe(hs, &devs, &mut rngs.hs_beta)?);
        }
    }
    Ok(())
}

/// `y_t − c_t − γ'x_t`.
fn partial_residuals_without_beta(parts: (&[f64], &[f64], &[f64]), y: &[f64], j: usize) -> Vec<f64> {
    let (gamma, c, x) = parts;
    (0..y.len())
        .map(|t| y[t] - c[t] - (0..j).map(|a| gamma[a] * x[t * j + a]).sum::<f64>())
        .collect()
}

/// `γ` from its Gaussian full conditional with prior `N(μ^γ, diag τ^γ)`.
fn draw_gamma(s: &mut SynthesisState, data: &SynthesisData, spec: &SynthesisSpec, rng: &mut RngHandle) -> Result<()> {
    let j = s.n_agents();
    let tau = s.tau_gamma(spec);
    let var = s.sv.variances();
    let mut prec = DMatrix::zeros(j, j);
    let mut lin = DVector::zeros(j);
    for a in 0..j {
        prec[(a, a)] = 1.0 / tau[a];
        lin[a] = s.mu_gamma[a] / tau[a];
    }
    for t in 0..data.t_len() {
        let xt = DVector::from_column_slice(&s.x[t * j..(t + 1) * j]);
        let bx: f64 = (0..j).map(|a| s.beta[t * j + a] * xt[a]).sum();
        let r = data.y[t] - s.intercept.c[t] - bx;
        prec += &xt * xt.transpose() / var[t];
        lin += &xt * (r / var[t]);
    }
    let chol = prec.cholesky().ok_or_else(|| BpsError::Numerical {
        iteration: 0,
        step: "gamma",
        index: 0,
        message: "posterior precision is not positive definite".into(),
    })?;
    let mean = chol.solve(&lin);
    let z = DVector::from_fn(j, |_, _| std_normal(rng));
    let dev = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("triangular solve");
    s.gamma = (mean + dev).iter().copied().collect();
    Ok(())
}

/// `β_t` period by period: prior `N(μ^β_t, diag τ^β)` and one Gaussian
/// observation, drawn by conditioning a prior draw on the data.
fn draw_beta_rt(s: &mut SynthesisState, data: &SynthesisData, spec: &SynthesisSpec, rng: &mut RngHandle) {
    let j = s.n_agents();
    let tau = s.tau_beta(spec);
    let var = s.sv.variances();
    for t in 0..data.t_len() {
        let x = &s.x[t * j..(t + 1) * j];
        let gx: f64 = (0..j).map(|a| s.gamma[a] * x[a]).sum();
        let r = data.y[t] - s.intercept.c[t] - gx;
        let b0: Vec<f64> = (0..j)
            .map(|a| s.mu_beta[t * j + a] + tau[a].sqrt() * std_normal(rng))
            .collect();
        let e0 = var[t].sqrt() * std_normal(rng);
        let scale: f64 = (0..j).map(|a| tau[a] * x[a] * x[a]).sum::<f64>() + var[t];
        let innov = r - (0..j).map(|a| x[a] * b0[a]).sum::<f64>() - e0;
        for a in 0..j {
            let gain = if scale > 0.0 { tau[a] * x[a] / scale } else { 0.0 };
            s.beta[t * j + a] = b0[a] + gain * innov;
        }
    }
}

/// RW weights: the whole `β` path by FFBS from `β_0 = 0`, then each diagonal
/// element of `V` from its increments.
pub fn rw_sweep_beta(s: &mut SynthesisState, data: &SynthesisData, spec: &SynthesisSpec, rngs: &mut SweepRngs) -> Result<()> {
    let j = s.n_agents();
    let t_len = data.t_len();
    let v = s.v_diag.clone().unwrap_or_else(|| vec![spec.rw_v_prior.shape / spec.rw_v_prior.rate; j]);
    let r = partial_residuals_without_beta((&s.gamma, &s.intercept.c, &s.x), &data.y, j);
    let rows: Vec<Vec<f64>> = (0..t_len).map(|t| s.x[t * j..(t + 1) * j].to_vec()).collect();
    let prior = RwRegressionPrior {
        m0: vec![0.0; j],
        p0_diag: vec![0.0; j],
        w_diag: v.clone(),
    };
    let path = ffbs_rw_regression(&r, &rows, &s.sv.variances(), &prior, &mut rngs.beta)?;
    for (t, b) in path.iter().enumerate() {
        s.beta[t * j..(t + 1) * j].copy_from_slice(b);
    }
    if spec.fixed.rw_variance {
        s.v_diag = Some(v);
        return Ok(());
    }
    let mut next_v = v.clone();
    for a in 0..j {
        let mut prev = 0.0;
        let mut ss = 0.0;
        for t in 0..t_len {
            ss += (s.beta[t * j + a] - prev).powi(2);
            prev = s.beta[t * j + a];
        }
        next_v[a] = mh_variance_gamma_prior(ss, t_len, v[a], spec.rw_v_prior, &mut rngs.rw_var)?;
    }
    s.v_diag = Some(next_v);
    Ok(())
}

/// Leaf-level sufficient statistics of `r_t = Σ_l φ_l X_tl + e_t` with
/// `e_t ~ N(0, v_t)` and `φ_l ~ N(0, leaf_var)`: the posterior precision
/// `A` and `b = X'V⁻¹r`.
struct CollapsedLeaves {
    a: DMatrix<f64>,
    b: DVector<f64>,
    counts: Vec<usize>,
}

impl CollapsedLeaves {
    fn collect(n_leaves: usize, leaf_of: &[usize], r: &[f64], x: &[f64], noise: &[f64], j: usize, leaf_var: f64) -> Self {
        let mut a = DMatrix::identity(n_leaves, n_leaves) / leaf_var;
        let mut b = DVector::zeros(n_leaves);
        let mut counts = vec![0; n_leaves];
        let mut row = vec![0.0; n_leaves];
        let mut seen = vec![false; n_leaves];
        let mut touched = Vec::with_capacity(j);
        for t in 0..r.len() {
            touched.clear();
            for k in 0..j {
                let l = leaf_of[t * j + k];
                counts[l] += 1;
                if !seen[l] {
                    seen[l] = true;
                    touched.push(l);
                }
                row[l] += x[t * j + k];
            }
            let w = 1.0 / noise[t];
            for (p, &l1) in touched.iter().enumerate() {
                b[l1] += w * row[l1] * r[t];
                for &l2 in &touched[p..] {
                    let v = w * row[l1] * row[l2];
                    a[(l1, l2)] += v;
                    if l1 != l2 {
                        a[(l2, l1)] += v;
                    }
                }
            }
            for &l in &touched {
                row[l] = 0.0;
                seen[l] = false;
            }
        }
        Self { a, b, counts }
    }

    /// Log marginal likelihood up to terms shared by all trees.
    fn log_marginal(&self, leaf_var: f64) -> Option<f64> {
        let chol = self.a.clone().cholesky()?;
        let ln_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let sol = chol.solve(&self.b);
        let n = self.counts.len() as f64;
        Some(-0.5 * (ln_det + n * leaf_var.ln()) + 0.5 * self.b.dot(&sol))
    }

    fn draw(&self, rng: &mut RngHandle) -> Vec<f64> {
        let chol = self.a.clone().cholesky().expect("leaf precision is positive definite");
        let mean = chol.solve(&self.b);
        let z = DVector::from_fn(self.counts.len(), |_, _| std_normal(rng));
        let dev = chol.l().transpose().solve_upper_triangular(&z).expect("triangular solve");
        (mean + dev).iter().copied().collect()
    }
}

/// Backfitting pass over the `β` trees with `β` integrated out: each tree's
/// structure move is judged on the marginal likelihood of
/// `y_t − c_t − γ'x_t` given the other trees, and its terminal values are
/// drawn jointly. Returns the new prior means `μ^β` (`T × J`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn update_beta_trees_collapsed(
    ens: &mut TreeEnsemble,
    z: &Matrix,
    cands: &SplitCandidates,
    base: &[f64],
    x: &[f64],
    obs_var: &[f64],
    tau: &[f64],
    cfg: &TreePriorConfig,
    allow_moves: bool,
    rng: &mut RngHandle,
) -> Result<Vec<f64>> {
    let t_len = base.len();
    let n = z.rows();
    let j = n / t_len;
    let leaf_var = cfg.leaf_variance(ens.n_trees());
    let noise: Vec<f64> = (0..t_len)
        .map(|t| obs_var[t] + (0..j).map(|a| tau[a] * x[t * j + a].powi(2)).sum::<f64>())
        .collect();
    let mut fits: Vec<Vec<f64>> = ens
        .trees
        .iter()
        .map(|tr| {
            let v = tr.leaf_values();
            tr.route_rows(z).into_iter().map(|l| v[l]).collect()
        })
        .collect();
    let mut total = vec![0.0; n];
    for f in &fits {
        for (a, b) in total.iter_mut().zip(f) {
            *a += b;
        }
    }
    let mut r = vec![0.0; t_len];
    for s_idx in 0..ens.n_trees() {
        for t in 0..t_len {
            let others: f64 = (0..j)
                .map(|a| (total[t * j + a] - fits[s_idx][t * j + a]) * x[t * j + a])
                .sum();
            r[t] = base[t] - others;
        }
        let tree = &ens.trees[s_idx];
        let leaf_of = tree.route_rows(z);
        let cur = CollapsedLeaves::collect(tree.n_terminals(), &leaf_of, &r, x, &noise, j, leaf_var);
        let mut chosen = None;
        if allow_moves {
            if let Some(mv) = propose_tree_move(tree, cands, cfg, rng) {
                let new_leaf_of = mv.tree.route_rows(z);
                let prop = CollapsedLeaves::collect(mv.tree.n_terminals(), &new_leaf_of, &r, x, &noise, j, leaf_var);
                let empty = mv.kind != MoveKind::Prune && prop.counts.contains(&0);
                if !empty {
                    if let (Some(ln), Some(lc)) = (prop.log_marginal(leaf_var), cur.log_marginal(leaf_var)) {
                        if rng.uniform().ln() < ln - lc + mv.log_ratio() {
                            chosen = Some((mv.tree, new_leaf_of, prop));
                        }
                    }
                }
            }
        }
        let (mut tree, leaf_of, stats) = match chosen {
            Some(c) => c,
            None => (ens.trees[s_idx].clone(), leaf_of, cur),
        };
        let values = stats.draw(rng);
        tree.set_leaf_values(&values);
        for i in 0..n {
            let v = values[leaf_of[i]];
            total[i] += v - fits[s_idx][i];
            fits[s_idx][i] = v;
        }
        ens.trees[s_idx] = tree;
    }
    Ok(total)
}
