//! Latent Gaussian state samplers: scalar FFBS (random-walk intercept and
//! AR(1) log-volatility), the random-walk regression FFBS used by the RW
//! baseline, and the variance updates that go with them.

pub(crate) mod rw;
mod sv;

pub use rw::{ffbs_rw_regression, RwRegressionPrior};
pub use sv::{mixture_components, sv_update, SvPriors, SvState, MIXTURE_MEANS, MIXTURE_PROBS, MIXTURE_VARS, SV_OFFSET};

use serde::{Deserialize, Serialize};

use crate::dist::{sample_inverse_gamma, std_normal};
use crate::error::{invalid, Result};
use crate::rng::RngHandle;

/// Gamma prior in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

/// Tight prior on the intercept's innovation variance, mean 0.01.
pub const SIGMA2_C_PRIOR: GammaPrior = GammaPrior { shape: 1.0, rate: 100.0 };

/// Prior of the intercept's first state.
pub const INTERCEPT_INIT: (f64, f64) = (0.0, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterceptPath {
    pub c: Vec<f64>,
    pub sigma2_c: f64,
}

impl InterceptPath {
    pub fn zeros(t: usize) -> Self {
        Self {
            c: vec![0.0; t],
            sigma2_c: SIGMA2_C_PRIOR.shape / SIGMA2_C_PRIOR.rate,
        }
    }
}

/// `x_1 ~ N(m0, v0)`, `x_t = a + phi x_{t-1} + N(0, q)`, `y_t = x_t + N(0, r_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarStateModel {
    pub a: f64,
    pub phi: f64,
    pub q: f64,
    pub m0: f64,
    pub v0: f64,
}

/// Exact joint draw of the states given the observations. An observation
/// variance of `+inf` marks a missing observation.
pub fn ffbs_scalar(y: &[f64], obs_var: &[f64], model: &ScalarStateModel, rng: &mut RngHandle) -> Result<Vec<f64>> {
    let t_len = y.len();
    if obs_var.len() != t_len {
        return Err(invalid("observations and variances differ in length"));
    }
    if let Some(i) = obs_var.iter().position(|v| !(*v > 0.0)) {
        return Err(invalid(format!("observation variance at {i} must be positive, got {}", obs_var[i])));
    }
    if !(model.q >= 0.0 && model.v0 > 0.0) || !model.q.is_finite() {
        return Err(invalid(format!("state variances q={} v0={} invalid", model.q, model.v0)));
    }
    if t_len == 0 {
        return Ok(vec![]);
    }
    let mut m = vec![0.0; t_len];
    let mut c = vec![0.0; t_len];
    let (mut a_pred, mut r_pred) = (model.m0, model.v0);
    for t in 0..t_len {
        if t > 0 {
            a_pred = model.a + model.phi * m[t - 1];
            r_pred = model.phi * model.phi * c[t - 1] + model.q;
        }
        if obs_var[t].is_finite() {
            let k = r_pred / (r_pred + obs_var[t]);
            m[t] = a_pred + k * (y[t] - a_pred);
            c[t] = (1.0 - k) * r_pred;
        } else {
            m[t] = a_pred;
            c[t] = r_pred;
        }
    }
    let mut x = vec![0.0; t_len];
    x[t_len - 1] = m[t_len - 1] + c[t_len - 1].max(0.0).sqrt() * std_normal(rng);
    for t in (0..t_len - 1).rev() {
        let r = model.phi * model.phi * c[t] + model.q;
        let (mean, var) = if r > 0.0 {
            let b = c[t] * model.phi / r;
            (m[t] + b * (x[t + 1] - model.a - model.phi * m[t]), c[t] * model.q / r)
        } else {
            // q = 0 and phi c_t = 0: the state is already pinned
            (m[t], c[t])
        };
        x[t] = mean + var.max(0.0).sqrt() * std_normal(rng);
    }
    Ok(x)
}

/// FFBS for the random-walk intercept of the synthesis equation.
pub fn ffbs_intercept(
    y_resid: &[f64],
    obs_variances: &[f64],
    sigma2_c: f64,
    c0_prior: (f64, f64),
    rng: &mut RngHandle,
) -> Result<Vec<f64>> {
    if !(sigma2_c >= 0.0) {
        return Err(invalid(format!("sigma2_c = {sigma2_c} must be nonnegative")));
    }
    let model = ScalarStateModel {
        a: 0.0,
        phi: 1.0,
        q: sigma2_c,
        m0: c0_prior.0,
        v0: c0_prior.1,
    };
    ffbs_scalar(y_resid, obs_variances, &model, rng)
}

/// Lower bound on variances updated here; below it the state-space model
/// is numerically degenerate.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Variance `v` with a Gamma prior and `n` Gaussian terms of sum of squares
/// `ss`. An independence MH step with the conditionally conjugate
/// `iG(n/2, ss/2)` proposal (whose ratio reduces to the Gamma prior's
/// remaining kernel) is followed by a random-walk step on `ln v`, which keeps
/// the chain moving when `ss` is near zero and the proposal degenerates.
pub fn mh_variance_gamma_prior(
    ss: f64,
    n: usize,
    current: f64,
    prior: GammaPrior,
    rng: &mut RngHandle,
) -> Result<f64> {
    if n == 0 {
        return Err(invalid("variance update needs at least one term"));
    }
    let mut x = if current > 0.0 && current.is_finite() {
        current.max(VARIANCE_FLOOR)
    } else {
        prior.shape / prior.rate
    };
    let proposal = sample_inverse_gamma(0.5 * n as f64, (0.5 * ss).max(1e-300), rng)?;
    if proposal >= VARIANCE_FLOOR {
        let log_alpha = prior.shape * (proposal / x).ln() - prior.rate * (proposal - x);
        if rng.uniform().ln() < log_alpha {
            x = proposal;
        }
    }
    // log target in u = ln v, Jacobian included
    let log_target = |u: f64| (prior.shape - 0.5 * n as f64) * u - prior.rate * u.exp() - 0.5 * ss * (-u).exp();
    let u = x.ln();
    let u_new = u + 0.5 * std_normal(rng);
    if u_new.exp() >= VARIANCE_FLOOR && rng.uniform().ln() < log_target(u_new) - log_target(u) {
        x = u_new.exp();
    }
    Ok(x)
}

/// `σ²_c` from the increments of the intercept path.
pub fn gibbs_update_sigma2_c(c_path: &[f64], current: f64, prior: GammaPrior, rng: &mut RngHandle) -> Result<f64> {
    if c_path.len() < 2 {
        return Err(invalid("intercept path needs at least two periods"));
    }
    let ss: f64 = c_path.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    mh_variance_gamma_prior(ss, c_path.len() - 1, current, prior, rng)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dist::sample_normal;

    /// Independent Rauch-Tung-Striebel smoother returning smoothed means
    /// and variances, written in the covariance form.
    pub fn rts_smoother(y: &[f64], r: &[f64], m: &ScalarStateModel) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        let (mut xf, mut pf, mut xp, mut pp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for t in 0..n {
            if t == 0 {
                xp[0] = m.m0;
                pp[0] = m.v0;
            } else {
                xp[t] = m.a + m.phi * xf[t - 1];
                pp[t] = m.phi * pf[t - 1] * m.phi + m.q;
            }
            let s = pp[t] + r[t];
            xf[t] = xp[t] + pp[t] / s * (y[t] - xp[t]);
            pf[t] = pp[t] - pp[t] * pp[t] / s;
        }
        let (mut xs, mut ps) = (xf.clone(), pf.clone());
        for t in (0..n - 1).rev() {
            let g = pf[t] * m.phi / pp[t + 1];
            xs[t] = xf[t] + g * (xs[t + 1] - xp[t + 1]);
            ps[t] = pf[t] + g * g * (ps[t + 1] - pp[t + 1]);
        }
        (xs, ps)
    }

    fn series20() -> (Vec<f64>, Vec<f64>) {
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin() + 0.05 * i as f64).collect();
        let r: Vec<f64> = (0..20).map(|i| 0.3 + 0.1 * (i % 3) as f64).collect();
        (y, r)
    }

    #[test]
    fn matches_kalman_smoother() {
        let (y, r) = series20();
        let model = ScalarStateModel { a: 0.0, phi: 1.0, q: 0.05, m0: 0.0, v0: 10.0 };
        let (xs, ps) = rts_smoother(&y, &r, &model);
        let mut rng = RngHandle::new(31, 0);
        let n = 10_000;
        let mut sum = vec![0.0; 20];
        let mut sum2 = vec![0.0; 20];
        for _ in 0..n {
            let d = ffbs_intercept(&y, &r, 0.05, (0.0, 10.0), &mut rng).unwrap();
            for t in 0..20 {
                sum[t] += d[t];
                sum2[t] += d[t] * d[t];
            }
        }
        for t in 0..20 {
            let mean = sum[t] / n as f64;
            let var = sum2[t] / n as f64 - mean * mean;
            let se_m = (ps[t] / n as f64).sqrt();
            let se_v = ps[t] * (2.0 / n as f64).sqrt();
            assert!((mean - xs[t]).abs() < 3.5 * se_m, "t={t} mean {mean} vs {}", xs[t]);
            assert!((var - ps[t]).abs() < 3.5 * se_v, "t={t} var {var} vs {}", ps[t]);
        }
    }

    #[test]
    fn ar1_matches_kalman_smoother() {
        let (y, r) = series20();
        let model = ScalarStateModel { a: 0.1, phi: 0.9, q: 0.2, m0: 1.0, v0: 0.2 / (1.0 - 0.81) };
        let (xs, ps) = rts_smoother(&y, &r, &model);
        let mut rng = RngHandle::new(32, 0);
        let n = 10_000;
        let mut sum = vec![0.0; 20];
        for _ in 0..n {
            let d = ffbs_scalar(&y, &r, &model, &mut rng).unwrap();
            for t in 0..20 {
                sum[t] += d[t];
            }
        }
        for t in 0..20 {
            let mean = sum[t] / n as f64;
            assert!((mean - xs[t]).abs() < 3.5 * (ps[t] / n as f64).sqrt(), "t={t}");
        }
    }

    #[test]
    fn vanishing_state_variance_gives_constant_level() {
        let (y, r) = series20();
        let prec: f64 = r.iter().map(|v| 1.0 / v).sum::<f64>() + 1.0 / 10.0;
        let level = y.iter().zip(&r).map(|(a, v)| a / v).sum::<f64>() / prec;
        let mut rng = RngHandle::new(33, 0);
        let n = 10_000;
        let mut sum = vec![0.0; 20];
        for _ in 0..n {
            let d = ffbs_intercept(&y, &r, 1e-12, (0.0, 10.0), &mut rng).unwrap();
            for t in 0..20 {
                sum[t] += d[t];
            }
        }
        // MC s.e. of each mean is sqrt(1/prec / n) ~ 1.2e-3, so compare
        // the exact smoother mean against the closed form at 1e-4 and the
        // draws at 3 s.e.
        let model = ScalarStateModel { a: 0.0, phi: 1.0, q: 1e-12, m0: 0.0, v0: 10.0 };
        let (xs, _) = rts_smoother(&y, &r, &model);
        for t in 0..20 {
            assert!((xs[t] - level).abs() < 1e-4);
            assert!((sum[t] / n as f64 - level).abs() < 3.0 * (1.0 / prec / n as f64).sqrt());
        }
    }

    #[test]
    fn uninformative_observations_give_prior_walk() {
        let t_len = 30;
        let y = vec![0.0; t_len];
        let r = vec![f64::INFINITY; t_len];
        let mut rng = RngHandle::new(34, 0);
        let n = 10_000;
        let q = 0.04;
        let diffs: Vec<f64> = (0..n)
            .map(|_| {
                let d = ffbs_intercept(&y, &r, q, (0.0, 10.0), &mut rng).unwrap();
                d[t_len - 1] - d[0]
            })
            .collect();
        let m = diffs.iter().sum::<f64>() / n as f64;
        let v = diffs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let target = (t_len - 1) as f64 * q;
        assert!((v - target).abs() < 3.0 * target * (2.0 / n as f64).sqrt(), "var {v} vs {target}");
    }

    #[test]
    fn rejects_nonpositive_variance() {
        let mut rng = RngHandle::new(0, 0);
        assert!(ffbs_intercept(&[1.0, 2.0], &[1.0, 0.0], 0.1, (0.0, 10.0), &mut rng).is_err());
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn sigma2_c_constant_path_concentrates_low() {
        let mut rng = RngHandle::new(35, 0);
        let path = vec![0.7; 40];
        let mut s = 0.01;
        let draws: Vec<f64> = (0..10_000)
            .map(|_| {
                s = gibbs_update_sigma2_c(&path, s, SIGMA2_C_PRIOR, &mut rng).unwrap();
                s
            })
            .collect();
        // prior median of Gamma(1, 100) is ln 2 / 100
        assert!(median(draws) < std::f64::consts::LN_2 / 100.0);
    }

    #[test]
    fn sigma2_c_recovers_known_variance() {
        let mut rng = RngHandle::new(36, 0);
        let v: f64 = 0.02;
        let mut path = vec![0.0; 500];
        for t in 1..500 {
            path[t] = path[t - 1] + sample_normal(0.0, v.sqrt(), &mut rng).unwrap();
        }
        let mut s = 0.01;
        let draws: Vec<f64> = (0..10_000)
            .map(|_| {
                s = gibbs_update_sigma2_c(&path, s, SIGMA2_C_PRIOR, &mut rng).unwrap();
                s
            })
            .collect();
        let m = median(draws);
        assert!((m / v - 1.0).abs() < 0.1, "median {m}");
    }

    #[test]
    fn sigma2_c_minimal_path() {
        let mut rng = RngHandle::new(37, 0);
        let s = gibbs_update_sigma2_c(&[0.0, 0.1], 0.01, SIGMA2_C_PRIOR, &mut rng).unwrap();
        assert!(s > 0.0 && s.is_finite());
        assert!(gibbs_update_sigma2_c(&[0.0], 0.01, SIGMA2_C_PRIOR, &mut rng).is_err());
    }

    // MH with a Gamma prior and no data-bearing increments beyond one term:
    // a long chain reproduces the exact posterior mean by quadrature.
    #[test]
    fn mh_variance_matches_quadrature() {
        let prior = GammaPrior { shape: 2.0, rate: 3.0 };
        let (ss, n) = (1.3, 4usize);
        let log_post = |x: f64| (prior.shape - 1.0) * x.ln() - prior.rate * x - 0.5 * n as f64 * x.ln() - 0.5 * ss / x;
        let (mut z, mut m1) = (0.0, 0.0);
        let h = 1e-4;
        let mut x = h;
        while x < 50.0 {
            let w = log_post(x).exp();
            z += w;
            m1 += w * x;
            x += h;
        }
        let exact = m1 / z;
        let mut rng = RngHandle::new(38, 0);
        let mut s = 1.0;
        let k = 400_000;
        let mut acc = 0.0;
        for _ in 0..k {
            s = mh_variance_gamma_prior(ss, n, s, prior, &mut rng).unwrap();
            acc += s;
        }
        let est = acc / k as f64;
        assert!((est / exact - 1.0).abs() < 0.01, "mh {est} exact {exact}");
    }
}
