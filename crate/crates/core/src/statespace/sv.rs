//! Stochastic volatility through the 10-component normal mixture for
//! `log χ²₁`: conditional on component indicators the log squared residuals
//! are a linear Gaussian observation of the AR(1) log-volatility.

use serde::{Deserialize, Serialize};

use super::{ffbs_scalar, mh_variance_gamma_prior, GammaPrior, ScalarStateModel};
use crate::dist::{beta_ln_kernel, categorical_unchecked, sample_inverse_gamma, sample_normal, std_normal};
use crate::error::{invalid, Result};
use crate::rng::RngHandle;

pub const SV_OFFSET: f64 = 1e-8;

pub const MIXTURE_PROBS: [f64; 10] = [
    0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115,
];
pub const MIXTURE_MEANS: [f64; 10] = [
    1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65,
];
pub const MIXTURE_VARS: [f64; 10] = [
    0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342,
];

/// `(prob, mean, variance)` per component.
pub fn mixture_components() -> impl Iterator<Item = (f64, f64, f64)> {
    (0..10).map(|k| (MIXTURE_PROBS[k], MIXTURE_MEANS[k], MIXTURE_VARS[k]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvPriors {
    /// Mean and variance of the Gaussian prior on `μ`.
    pub mu: (f64, f64),
    /// Beta parameters for `(ρ + 1) / 2`.
    pub rho_beta: (f64, f64),
    pub sigma2: GammaPrior,
    /// Inverse-Gamma `(shape, scale)` of the constant variance.
    pub homoskedastic: (f64, f64),
}

impl Default for SvPriors {
    fn default() -> Self {
        Self {
            mu: (0.0, 100.0),
            rho_beta: (5.0, 1.5),
            sigma2: GammaPrior { shape: 0.5, rate: 0.5 },
            homoskedastic: (0.01, 0.01),
        }
    }
}

/// Log-volatility path and its AR(1) parameters. In homoskedastic mode the
/// path is constant at `ln σ²` and `(rho, sigma2)` are not used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvState {
    pub log_vol: Vec<f64>,
    pub mu: f64,
    pub rho: f64,
    pub sigma2: f64,
    pub homoskedastic: bool,
}

impl SvState {
    pub fn new(t: usize, initial_variance: f64, homoskedastic: bool) -> Self {
        let lv = initial_variance.max(1e-12).ln();
        Self {
            log_vol: vec![lv; t],
            mu: lv,
            rho: 0.9,
            sigma2: 0.05,
            homoskedastic,
        }
    }

    pub fn variance(&self, t: usize) -> f64 {
        self.log_vol[t].exp()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.log_vol.iter().map(|h| h.exp()).collect()
    }

    /// Log-volatility `steps` periods past the end of the path, simulated
    /// through the AR(1) (fixed in homoskedastic mode).
    pub fn project(&self, steps: usize, rng: &mut RngHandle) -> f64 {
        let mut h = *self.log_vol.last().unwrap_or(&self.mu);
        if self.homoskedastic {
            return h;
        }
        let sd = self.sigma2.sqrt();
        for _ in 0..steps {
            h = self.mu + self.rho * (h - self.mu) + sd * std_normal(rng);
        }
        h
    }
}

/// One sweep: mixture indicators, log-vol path, then `σ²`, `ρ`, `μ`.
pub fn sv_update(residuals: &[f64], state: &SvState, priors: &SvPriors, rng: &mut RngHandle) -> Result<SvState> {
    let t_len = residuals.len();
    if state.log_vol.len() != t_len {
        return Err(invalid(format!(
            "{} residuals for a log-volatility path of length {}",
            t_len,
            state.log_vol.len()
        )));
    }
    if let Some(i) = residuals.iter().position(|r| !r.is_finite()) {
        return Err(invalid(format!("residual {i} is not finite")));
    }
    let mut next = state.clone();
    if state.homoskedastic {
        let ss: f64 = residuals.iter().map(|r| r * r).sum();
        let (a0, b0) = priors.homoskedastic;
        let s2 = sample_inverse_gamma(a0 + 0.5 * t_len as f64, b0 + 0.5 * ss, rng)?;
        next.log_vol = vec![s2.ln(); t_len];
        next.mu = s2.ln();
        return Ok(next);
    }
    if t_len < 2 {
        return Err(invalid("stochastic volatility needs at least two periods"));
    }

    let ystar: Vec<f64> = residuals.iter().map(|r| (r * r + SV_OFFSET).ln()).collect();
    let mut obs = vec![0.0; t_len];
    let mut obs_var = vec![0.0; t_len];
    let mut w = [0.0; 10];
    for t in 0..t_len {
        let e = ystar[t] - state.log_vol[t];
        let mut max_lw = f64::NEG_INFINITY;
        for k in 0..10 {
            let d = e - MIXTURE_MEANS[k];
            w[k] = MIXTURE_PROBS[k].ln() - 0.5 * MIXTURE_VARS[k].ln() - 0.5 * d * d / MIXTURE_VARS[k];
            max_lw = max_lw.max(w[k]);
        }
        let mut total = 0.0;
        for wk in w.iter_mut() {
            *wk = (*wk - max_lw).exp();
            total += *wk;
        }
        let k = categorical_unchecked(&w, total, rng);
        obs[t] = ystar[t] - MIXTURE_MEANS[k];
        obs_var[t] = MIXTURE_VARS[k];
    }

    let (mu, rho, s2) = (state.mu, state.rho, state.sigma2);
    let model = ScalarStateModel {
        a: mu * (1.0 - rho),
        phi: rho,
        q: s2,
        m0: mu,
        v0: s2 / (1.0 - rho * rho),
    };
    let h = ffbs_scalar(&obs, &obs_var, &model, rng)?;

    // σ² given (h, μ, ρ): T Gaussian terms including the stationary start
    let dev: Vec<f64> = h.iter().map(|x| x - mu).collect();
    let ss = (1.0 - rho * rho) * dev[0] * dev[0]
        + dev.windows(2).map(|p| (p[1] - rho * p[0]).powi(2)).sum::<f64>();
    let s2 = mh_variance_gamma_prior(ss, t_len, s2, priors.sigma2, rng)?;

    // ρ by independence MH from the conditional regression; the prior and the
    // stationary start density enter the ratio
    let sxx: f64 = dev[..t_len - 1].iter().map(|x| x * x).sum();
    let sxy: f64 = dev.windows(2).map(|p| p[0] * p[1]).sum();
    let rho = if sxx > 0.0 {
        let prop = sample_normal(sxy / sxx, (s2 / sxx).sqrt(), rng)?;
        if prop.abs() < 1.0 {
            let log_target = |r: f64| {
                beta_ln_kernel(0.5 * (r + 1.0), priors.rho_beta.0, priors.rho_beta.1) + 0.5 * (1.0 - r * r).ln()
                    - 0.5 * (1.0 - r * r) * dev[0] * dev[0] / s2
            };
            if rng.uniform().ln() < log_target(prop) - log_target(rho) {
                prop
            } else {
                rho
            }
        } else {
            rho
        }
    } else {
        rho
    };

    // μ given (h, ρ, σ²): conjugate Gaussian
    let one_m = 1.0 - rho;
    let prec = (1.0 - rho * rho) / s2 + (t_len - 1) as f64 * one_m * one_m / s2 + 1.0 / priors.mu.1;
    let lin = (1.0 - rho * rho) * h[0] / s2
        + one_m * h.windows(2).map(|p| p[1] - rho * p[0]).sum::<f64>() / s2
        + priors.mu.0 / priors.mu.1;
    let mu = sample_normal(lin / prec, (1.0 / prec).sqrt(), rng)?;

    next.log_vol = h;
    next.mu = mu;
    next.rho = rho;
    next.sigma2 = s2;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_normalizes_and_matches_log_chi2() {
        let total: f64 = MIXTURE_PROBS.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // E log χ²₁ = ψ(1/2) + ln 2 = -1.2704
        let mean: f64 = mixture_components().map(|(p, m, _)| p * m).sum();
        assert!((mean + 1.270_362_845_461_478).abs() < 1e-3, "{mean}");
        // Var log χ²₁ = π²/2
        let var: f64 = mixture_components().map(|(p, m, v)| p * (v + m * m)).sum::<f64>() - mean * mean;
        assert!((var - std::f64::consts::PI.powi(2) / 2.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn homoskedastic_recovers_variance() {
        let mut rng = RngHandle::new(41, 0);
        let r: Vec<f64> = (0..10_000).map(|_| sample_normal(0.0, 2.0, &mut rng).unwrap()).collect();
        let ss: f64 = r.iter().map(|x| x * x).sum();
        let mut st = SvState::new(r.len(), 1.0, true);
        let priors = SvPriors::default();
        let n = 2000;
        let mut acc = 0.0;
        for _ in 0..n {
            st = sv_update(&r, &st, &priors, &mut rng).unwrap();
            acc += st.variance(0);
        }
        let post_mean = acc / n as f64;
        // conjugate closed form
        let exact = (0.01 + 0.5 * ss) / (0.01 + 0.5 * r.len() as f64 - 1.0);
        assert!((post_mean / exact - 1.0).abs() < 0.005);
        assert!((post_mean / 4.0 - 1.0).abs() < 0.02, "{post_mean}");
    }

    #[test]
    fn zero_residuals_stay_finite() {
        let mut rng = RngHandle::new(42, 0);
        let r = vec![0.0; 50];
        let priors = SvPriors::default();
        for homo in [false, true] {
            let mut st = SvState::new(50, 1.0, homo);
            for _ in 0..200 {
                st = sv_update(&r, &st, &priors, &mut rng).unwrap();
                assert!(st.log_vol.iter().all(|h| h.is_finite()));
                assert!(st.mu.is_finite() && st.rho.abs() < 1.0 && st.sigma2 > 0.0 && st.sigma2.is_finite());
            }
        }
    }

    #[test]
    fn recovers_persistence() {
        let (mu, rho, s2): (f64, f64, f64) = (0.0, 0.95, 0.05);
        let t_len = 2000;
        let mut rng = RngHandle::new(43, 0);
        let mut h = sample_normal(mu, (s2 / (1.0 - rho * rho)).sqrt(), &mut rng).unwrap();
        let mut r = Vec::with_capacity(t_len);
        for _ in 0..t_len {
            r.push((0.5 * h).exp() * std_normal(&mut rng));
            h = mu + rho * (h - mu) + s2.sqrt() * std_normal(&mut rng);
        }
        let priors = SvPriors::default();
        let mut st = SvState::new(t_len, 1.0, false);
        let (burn, keep) = (1000, 3000);
        let mut acc = 0.0;
        for i in 0..burn + keep {
            st = sv_update(&r, &st, &priors, &mut rng).unwrap();
            if i >= burn {
                acc += st.rho;
            }
        }
        let post = acc / keep as f64;
        assert!((post - rho).abs() < 0.05, "posterior mean rho {post}");
    }

    #[test]
    fn projection_is_deterministic_when_homoskedastic() {
        let mut rng = RngHandle::new(44, 0);
        let st = SvState::new(5, 2.0, true);
        assert_eq!(st.project(4, &mut rng), 2.0f64.ln());
    }
}
