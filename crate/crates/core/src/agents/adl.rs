//! Direct h-step autoregressive distributed-lag agent:
//! `π_{τ+h} = ρ π_τ + α x_τ + ε_{τ+h}`, estimated by Gibbs sampling on a
//! rolling window with homoskedastic or stochastic-volatility errors.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dist::std_normal;
use crate::error::{invalid, shape, Result};
use crate::rng::RngHandle;
use crate::statespace::{sv_update, SvPriors, SvState};
use crate::types::{DrawMatrix, TimeSeriesF};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdlPriors {
    /// Prior variance of `ρ` and `α` (zero mean).
    pub coef_var: f64,
    pub vol: SvPriors,
}

impl Default for AdlPriors {
    fn default() -> Self {
        Self {
            coef_var: 100.0,
            vol: SvPriors::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdlModelSpec {
    pub indicator_index: usize,
    pub sv: bool,
    pub horizon: usize,
    pub window: usize,
    pub n_iter: usize,
    pub n_burn: usize,
    pub n_draws: usize,
    pub priors: AdlPriors,
}

impl AdlModelSpec {
    pub fn new(indicator_index: usize, sv: bool, horizon: usize) -> Self {
        Self {
            indicator_index,
            sv,
            horizon,
            window: 80,
            n_iter: 3000,
            n_burn: 500,
            n_draws: 1000,
            priors: AdlPriors::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 10 {
            return Err(invalid(format!("window {} below the minimum of 10", self.window)));
        }
        if self.horizon == 0 || self.horizon + 2 > self.window {
            return Err(invalid(format!("horizon {} incompatible with window {}", self.horizon, self.window)));
        }
        if self.n_burn >= self.n_iter || self.n_draws == 0 {
            return Err(invalid("ADL budget needs n_burn < n_iter and n_draws > 0"));
        }
        Ok(())
    }
}

/// One Gibbs state: coefficients `(ρ, α)` and the error-variance block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdlGibbsState {
    pub coef: [f64; 2],
    pub vol: SvState,
}

impl AdlGibbsState {
    pub fn new(n_obs: usize, sv: bool) -> Self {
        Self {
            coef: [0.0, 0.0],
            vol: SvState::new(n_obs, 1.0, !sv),
        }
    }
}

/// Conditional Gaussian of the coefficients given the variances:
/// `(mean, precision)`.
fn coef_conditional(y: &[f64], x: &[[f64; 2]], var: &[f64], prior_var: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let mut prec = Matrix2::identity() / prior_var;
    let mut lin = Vector2::zeros();
    for ((yi, xi), vi) in y.iter().zip(x).zip(var) {
        let xv = Vector2::new(xi[0], xi[1]);
        prec += xv * xv.transpose() / *vi;
        lin += xv * (*yi / *vi);
    }
    let mean = prec.cholesky().map(|c| c.solve(&lin)).unwrap_or_else(Vector2::zeros);
    (mean, prec)
}

/// Coefficients given variances, then variances given coefficients.
pub fn adl_gibbs_step(
    state: &AdlGibbsState,
    y: &[f64],
    x: &[[f64; 2]],
    priors: &AdlPriors,
    rng: &mut RngHandle,
) -> Result<AdlGibbsState> {
    let var = state.vol.variances();
    let (mean, prec) = coef_conditional(y, x, &var, priors.coef_var);
    let chol = prec
        .cholesky()
        .ok_or_else(|| invalid("coefficient precision is not positive definite"))?;
    // b = mean + L^{-T} z has covariance prec^{-1}
    let z = Vector2::new(std_normal(rng), std_normal(rng));
    let dev = chol.l().transpose().solve_upper_triangular(&z).unwrap_or_else(Vector2::zeros);
    let coef = [mean[0] + dev[0], mean[1] + dev[1]];
    let resid: Vec<f64> = y
        .iter()
        .zip(x)
        .map(|(yi, xi)| yi - coef[0] * xi[0] - coef[1] * xi[1])
        .collect();
    let vol = sv_update(&resid, &state.vol, &priors.vol, rng)?;
    Ok(AdlGibbsState { coef, vol })
}

/// Predictive draws for `π_{t+h}` plus the Rao-Blackwellized predictive
/// mean, which averages the conditional posterior mean of the regression
/// function over the retained variance draws.
#[derive(Debug, Clone, PartialEq)]
pub struct AdlForecast {
    pub draws: DrawMatrix,
    pub mean: f64,
    pub coef_draws: Vec<[f64; 2]>,
}

/// Response/regressor pairs whose dates all lie in `(t − window, t]`.
pub fn window_data(
    spec: &AdlModelSpec,
    target: &TimeSeriesF,
    indicator: &TimeSeriesF,
    origin: i64,
) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    let h = spec.horizon as i64;
    let first = origin - spec.window as i64 + 1;
    let mut y = Vec::new();
    let mut x = Vec::new();
    for tau in first..=origin - h {
        let (Some(resp), Some(lag), Some(ind)) = (target.at(tau + h), target.at(tau), indicator.at(tau)) else {
            return Err(shape(format!("window for origin {origin} needs data at periods {tau} and {}", tau + h)));
        };
        y.push(resp);
        x.push([lag, ind]);
    }
    Ok((y, x))
}

/// Fit on the rolling window ending at `origin` and simulate `π_{origin+h}`.
pub fn fit_adl_and_forecast(
    spec: &AdlModelSpec,
    target: &TimeSeriesF,
    indicator: &TimeSeriesF,
    origin: i64,
    rng: &mut RngHandle,
) -> Result<AdlForecast> {
    spec.validate()?;
    let (y, x) = window_data(spec, target, indicator, origin)?;
    let x_now = match (target.at(origin), indicator.at(origin)) {
        (Some(a), Some(b)) => [a, b],
        _ => return Err(shape(format!("no data at origin {origin}"))),
    };
    let mut state = AdlGibbsState::new(y.len(), spec.sv);
    let mut kept = Vec::with_capacity(spec.n_iter - spec.n_burn);
    for it in 0..spec.n_iter {
        state = adl_gibbs_step(&state, &y, &x, &spec.priors, rng).map_err(|e| e.at_iteration(it))?;
        if it >= spec.n_burn {
            kept.push(state.clone());
        }
    }
    let n_kept = kept.len();
    let mut rb = 0.0;
    for s in &kept {
        let (m, _) = coef_conditional(&y, &x, &s.vol.variances(), spec.priors.coef_var);
        rb += m[0] * x_now[0] + m[1] * x_now[1];
    }
    let mut draws = Vec::with_capacity(spec.n_draws);
    let mut coef_draws = Vec::with_capacity(spec.n_draws);
    for i in 0..spec.n_draws {
        let s = &kept[i * n_kept / spec.n_draws];
        let lv = s.vol.project(spec.horizon, rng);
        let mean = s.coef[0] * x_now[0] + s.coef[1] * x_now[1];
        draws.push(mean + (0.5 * lv).exp() * std_normal(rng));
        coef_draws.push(s.coef);
    }
    Ok(AdlForecast {
        draws: DrawMatrix { draws, analytic: None },
        mean: rb / n_kept as f64,
        coef_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sample_inverse_gamma, sample_normal};

    fn series(vals: Vec<f64>) -> TimeSeriesF {
        TimeSeriesF::new(vals, 1, "quarterly").unwrap()
    }

    fn small_spec(sv: bool) -> AdlModelSpec {
        AdlModelSpec {
            n_iter: 1500,
            n_burn: 300,
            n_draws: 500,
            ..AdlModelSpec::new(0, sv, 1)
        }
    }

    #[test]
    fn zero_indicator_leaves_alpha_at_prior() {
        let mut rng = RngHandle::new(61, 0);
        let pi: Vec<f64> = (0..100).map(|_| sample_normal(0.0, 1.0, &mut rng).unwrap()).collect();
        let spec = AdlModelSpec { n_iter: 6000, n_burn: 500, ..AdlModelSpec::new(0, false, 1) };
        let (y, x) = window_data(&spec, &series(pi.clone()), &series(vec![0.0; 100]), 100).unwrap();
        let mut st = AdlGibbsState::new(y.len(), false);
        let mut a = Vec::new();
        for it in 0..spec.n_iter {
            st = adl_gibbs_step(&st, &y, &x, &spec.priors, &mut rng).unwrap();
            if it >= spec.n_burn {
                a.push(st.coef[1]);
            }
        }
        let m = a.iter().sum::<f64>() / a.len() as f64;
        let sd = (a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (a.len() as f64 - 1.0)).sqrt();
        assert!((sd / 10.0 - 1.0).abs() < 0.05, "sd {sd}");
    }

    fn simulate_adl(rho: f64, alpha: f64, sigma: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = RngHandle::new(seed, 0);
        let x: Vec<f64> = (0..n).map(|_| sample_normal(0.0, 1.0, &mut rng).unwrap()).collect();
        let mut pi = vec![0.0; n];
        for t in 1..n {
            pi[t] = rho * pi[t - 1] + alpha * x[t - 1] + sigma * std_normal(&mut rng);
        }
        (pi, x)
    }

    #[test]
    fn recovers_known_coefficients() {
        let (pi, x) = simulate_adl(0.5, 0.3, 1.0, 81, 62);
        let spec = small_spec(false);
        let mut rng = RngHandle::new(63, 0);
        let f = fit_adl_and_forecast(&spec, &series(pi), &series(x), 81, &mut rng).unwrap();
        for (k, truth) in [(0, 0.5), (1, 0.3)] {
            let v: Vec<f64> = f.coef_draws.iter().map(|c| c[k]).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt();
            assert!((m - truth).abs() < 3.0 * sd, "coef {k}: {m} +- {sd}");
        }
    }

    #[test]
    fn zero_noise_predictive_mean_is_exact() {
        let (_, x) = simulate_adl(0.5, 0.3, 0.0, 120, 64);
        // start away from zero so the regression is well identified
        let mut pi2 = vec![1.0; 120];
        for t in 1..120 {
            pi2[t] = 0.5 * pi2[t - 1] + 0.3 * x[t - 1];
        }
        let spec = small_spec(false);
        let mut rng = RngHandle::new(65, 0);
        let origin = 120;
        let f = fit_adl_and_forecast(&spec, &series(pi2.clone()), &series(x.clone()), origin, &mut rng).unwrap();
        let truth = 0.5 * pi2[119] + 0.3 * x[119];
        assert!((f.mean - truth).abs() < 1e-6, "{} vs {truth}", f.mean);
    }

    #[test]
    fn short_history_is_a_shape_error() {
        let spec = small_spec(false);
        let mut rng = RngHandle::new(0, 0);
        let r = fit_adl_and_forecast(&spec, &series(vec![0.0; 30]), &series(vec![0.0; 30]), 30, &mut rng);
        assert!(matches!(r, Err(crate::BpsError::DataShape(_))));
    }

    // Changing data after the origin leaves the forecast untouched.
    #[test]
    fn no_information_leakage() {
        let (pi, x) = simulate_adl(0.5, 0.3, 1.0, 120, 66);
        let spec = AdlModelSpec { n_iter: 200, n_burn: 50, n_draws: 50, ..AdlModelSpec::new(0, true, 2) };
        let run = |pi: &[f64], x: &[f64]| {
            let mut rng = RngHandle::new(67, 0);
            fit_adl_and_forecast(&spec, &series(pi.to_vec()), &series(x.to_vec()), 100, &mut rng).unwrap()
        };
        let base = run(&pi, &x);
        let mut pi2 = pi.clone();
        let mut x2 = x.clone();
        for t in 100..120 {
            pi2[t] += 5.0;
            x2[t] -= 3.0;
        }
        let pert = run(&pi2, &x2);
        assert_eq!(base.draws, pert.draws);
        assert_eq!(base.mean, pert.mean);
    }

    // Geweke: the marginal-conditional and successive-conditional simulators
    // agree on the first two moments of the parameters.
    #[test]
    fn geweke_joint_distribution() {
        let priors = AdlPriors {
            coef_var: 1.0,
            vol: SvPriors { homoskedastic: (3.0, 2.0), ..SvPriors::default() },
        };
        let n = 20;
        let mut rng = RngHandle::new(68, 0);
        let x: Vec<[f64; 2]> = (0..n).map(|i| [((i * 7) % 5) as f64 * 0.3 - 0.6, (i as f64 * 0.9).sin()]).collect();
        let draw_y = |coef: [f64; 2], s2: f64, rng: &mut RngHandle| -> Vec<f64> {
            x.iter().map(|xi| coef[0] * xi[0] + coef[1] * xi[1] + s2.sqrt() * std_normal(rng)).collect()
        };
        let reps = 100_000;
        let mut mc = [0.0f64; 3];
        for _ in 0..reps {
            let c = [std_normal(&mut rng), std_normal(&mut rng)];
            let s2 = sample_inverse_gamma(3.0, 2.0, &mut rng).unwrap();
            mc[0] += c[0];
            mc[1] += c[1] * c[1];
            mc[2] += s2.min(10.0);
        }
        let mut st = AdlGibbsState::new(n, false);
        st.vol.log_vol = vec![1.0f64.ln(); n];
        let mut sc = [0.0f64; 3];
        let mut y = draw_y(st.coef, 1.0, &mut rng);
        for _ in 0..reps {
            st = adl_gibbs_step(&st, &y, &x, &priors, &mut rng).unwrap();
            y = draw_y(st.coef, st.vol.variance(0), &mut rng);
            sc[0] += st.coef[0];
            sc[1] += st.coef[1] * st.coef[1];
            sc[2] += st.vol.variance(0).min(10.0);
        }
        let exact = [0.0, 1.0, 1.0];
        for k in 0..3 {
            let (a, b) = (mc[k] / reps as f64, sc[k] / reps as f64);
            // successive-conditional draws are autocorrelated; 0.05 is several
            // effective standard errors for these O(1) moments
            assert!((a - b).abs() < 0.05, "moment {k}: {a} vs {b}");
            assert!((a - exact[k]).abs() < 0.03, "moment {k}: {a} vs {}", exact[k]);
        }
    }
}
