//! Updates of the latent agent draws `x_t`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::density::AgentDensity;
use crate::dist::std_normal;
use crate::rng::RngHandle;
use crate::statespace::rw::mvn_draw;

/// Adapted-covariance scale of the random-walk proposal.
const ADAPTIVE_SCALE: f64 = 2.38 * 2.38;
/// Variance of the fixed-scale component, before division by `J`.
const FIXED_VARIANCE: f64 = 0.1 * 0.1;
/// Draws collected before the running covariance replaces the seed covariance.
const MIN_ADAPT_SAMPLES: usize = 20;

/// Mixture random-walk proposal `(1−κ)N(x, 2.38² Q/J) + κN(x, 0.1² I/J)` with
/// a running estimate `Q` of the target covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveProposal {
    pub kappa: f64,
    n: usize,
    mean: Vec<f64>,
    /// Sum of centered outer products, row-major `J × J`.
    m2: Vec<f64>,
    /// Used until enough samples have been collected.
    seed_cov: Vec<f64>,
    pub frozen: bool,
    pub proposed: usize,
    pub accepted: usize,
}

impl AdaptiveProposal {
    /// `seed_var` gives the diagonal of the covariance used before adaptation.
    pub fn new(kappa: f64, seed_var: &[f64]) -> Self {
        let j = seed_var.len();
        let mut seed_cov = vec![0.0; j * j];
        for (i, v) in seed_var.iter().enumerate() {
            seed_cov[i * j + i] = v.max(1e-12);
        }
        Self {
            kappa,
            n: 0,
            mean: vec![0.0; j],
            m2: vec![0.0; j * j],
            seed_cov,
            frozen: false,
            proposed: 0,
            accepted: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }

    /// Welford update with the current state; ignored once frozen.
    pub fn observe(&mut self, x: &[f64]) {
        if self.frozen {
            return;
        }
        let j = self.dim();
        self.n += 1;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for i in 0..j {
            self.mean[i] += delta[i] / self.n as f64;
        }
        for a in 0..j {
            for b in 0..j {
                self.m2[a * j + b] += delta[a] * (x[b] - self.mean[b]);
            }
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let j = self.dim();
        if self.n < MIN_ADAPT_SAMPLES.max(2 * j) {
            return DMatrix::from_row_slice(j, j, &self.seed_cov);
        }
        let mut c = DMatrix::from_row_slice(j, j, &self.m2) / (self.n - 1) as f64;
        for i in 0..j {
            c[(i, i)] += 1e-10;
        }
        c
    }

    pub fn propose(&self, x: &[f64], rng: &mut RngHandle) -> Vec<f64> {
        let j = self.dim();
        let jf = j as f64;
        if rng.uniform() < self.kappa {
            let sd = (FIXED_VARIANCE / jf).sqrt();
            x.iter().map(|v| v + sd * std_normal(rng)).collect()
        } else {
            let cov = self.covariance() * (ADAPTIVE_SCALE / jf);
            let d = mvn_draw(&DVector::zeros(j), &cov, rng);
            x.iter().zip(d.iter()).map(|(a, b)| a + b).collect()
        }
    }
}

/// Log target of `x_t`: synthesis likelihood plus agent log densities. An
/// infinite `obs_var` switches the likelihood off.
pub fn agent_draw_log_target(x: &[f64], weights: &[f64], resid: f64, obs_var: f64, densities: &[AgentDensity]) -> f64 {
    let mut lp: f64 = x.iter().zip(densities).map(|(v, d)| d.ln_density(*v)).sum();
    if obs_var.is_finite() {
        let fit: f64 = x.iter().zip(weights).map(|(a, w)| a * w).sum();
        lp -= 0.5 * (resid - fit).powi(2) / obs_var;
    }
    lp
}

/// One MH step for `x_t` given weights `γ + β_t`, `resid = y_t − c_t`.
/// The running covariance sees the post-step point. Returns the accept flag.
pub fn mh_update_agent_draws(
    x: &mut [f64],
    weights: &[f64],
    resid: f64,
    obs_var: f64,
    densities: &[AgentDensity],
    proposal: &mut AdaptiveProposal,
    rng: &mut RngHandle,
) -> bool {
    let cand = proposal.propose(x, rng);
    let lp_new = agent_draw_log_target(&cand, weights, resid, obs_var, densities);
    let lp_old = agent_draw_log_target(x, weights, resid, obs_var, densities);
    proposal.proposed += 1;
    let accept = lp_new.is_finite() && (rng.uniform().ln() < lp_new - lp_old || !lp_old.is_finite());
    if accept {
        x.copy_from_slice(&cand);
        proposal.accepted += 1;
    }
    proposal.observe(x);
    accept
}

/// Exact draw of `x_t` when every agent density is Gaussian: the product of
/// `N(m_j, s_j²)` with the synthesis likelihood is Gaussian.
pub fn gibbs_gaussian_agent_draws(
    weights: &[f64],
    resid: f64,
    obs_var: f64,
    gauss: &[(f64, f64)],
    rng: &mut RngHandle,
) -> Vec<f64> {
    let j = gauss.len();
    let w = DVector::from_column_slice(weights);
    let mut prec = DMatrix::zeros(j, j);
    let mut lin = DVector::zeros(j);
    for (i, (m, s)) in gauss.iter().enumerate() {
        prec[(i, i)] = 1.0 / (s * s);
        lin[i] = m / (s * s);
    }
    if obs_var.is_finite() {
        prec += &w * w.transpose() / obs_var;
        lin += &w * (resid / obs_var);
    }
    let chol = prec.cholesky().expect("agent-draw precision is positive definite");
    let mean = chol.solve(&lin);
    // x = mean + L^{-T} z has covariance prec^{-1}
    let z = DVector::from_fn(j, |_, _| std_normal(rng));
    let dev = chol.l().transpose().solve_upper_triangular(&z).expect("triangular solve");
    (mean + dev).iter().copied().collect()
}
