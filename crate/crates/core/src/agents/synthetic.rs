//! Synthetic inflation-style data with drifting indicator relevance, and
//! the per-indicator ADL agent archive built from it.

use serde::{Deserialize, Serialize};

use super::adl::{fit_adl_and_forecast, AdlModelSpec};
use crate::dist::std_normal;
use crate::error::{invalid, Result};
use crate::rng::{RngHandle, Step};
use crate::types::{AgentForecast, AgentForecastArchive, ArchiveRow, TimeSeriesF};

/// `π_t = φ π_{t−1} + Σ_k a_k(t) x_{k,t−1} + exp(l_t / 2) ε_t`, with AR(1)
/// indicators and log-variance `l_t` following a stationary AR(1). Indicator
/// `k` matters most around period `(k + 0.5) · t_len / K`: its loading is a
/// Gaussian bump in time, so the best agent changes across the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdlDgpConfig {
    pub t_len: usize,
    pub n_indicators: usize,
    pub phi: f64,
    pub indicator_rho: f64,
    pub loading: f64,
    pub vol_rho: f64,
    pub vol_sd: f64,
    pub mean_log_var: f64,
    /// Period label of the first observation (quarterly index `year * 4 + q − 1`).
    pub start: i64,
}

impl Default for AdlDgpConfig {
    fn default() -> Self {
        Self {
            t_len: 200,
            n_indicators: 4,
            phi: 0.5,
            indicator_rho: 0.7,
            loading: 0.8,
            vol_rho: 0.95,
            vol_sd: 0.15,
            mean_log_var: -1.0,
            start: 1970 * 4,
        }
    }
}

impl AdlDgpConfig {
    pub fn loading_at(&self, k: usize, t: usize) -> f64 {
        let centre = (k as f64 + 0.5) * self.t_len as f64 / self.n_indicators as f64;
        let width = self.t_len as f64 / (2.0 * self.n_indicators as f64);
        self.loading * (-0.5 * ((t as f64 - centre) / width).powi(2)).exp()
    }
}

/// Target and named indicators, all covering `t_len` periods from `start`.
pub fn simulate_adl_data(cfg: &AdlDgpConfig, seed: u64) -> Result<(TimeSeriesF, Vec<(String, TimeSeriesF)>)> {
    if cfg.t_len < 20 || cfg.n_indicators == 0 {
        return Err(invalid("synthetic ADL data needs t_len >= 20 and at least one indicator"));
    }
    let mut rng = RngHandle::for_step(seed, 0, Step::Simulation);
    let k = cfg.n_indicators;
    let mut x = vec![vec![0.0; cfg.t_len]; k];
    let mut pi = vec![0.0; cfg.t_len];
    let mut lv = cfg.mean_log_var;
    let ind_sd = (1.0 - cfg.indicator_rho * cfg.indicator_rho).sqrt();
    for t in 0..cfg.t_len {
        for xk in x.iter_mut() {
            let prev = if t > 0 { xk[t - 1] } else { 0.0 };
            xk[t] = cfg.indicator_rho * prev + ind_sd * std_normal(&mut rng);
        }
        lv = cfg.mean_log_var + cfg.vol_rho * (lv - cfg.mean_log_var) + cfg.vol_sd * std_normal(&mut rng);
        if t > 0 {
            let signal: f64 = (0..k).map(|i| cfg.loading_at(i, t) * x[i][t - 1]).sum();
            pi[t] = cfg.phi * pi[t - 1] + signal + (0.5 * lv).exp() * std_normal(&mut rng);
        }
    }
    let target = TimeSeriesF::new(pi, cfg.start, "Q")?;
    let indicators = x
        .into_iter()
        .enumerate()
        .map(|(i, v)| Ok((format!("x{}", i + 1), TimeSeriesF::new(v, cfg.start, "Q")?)))
        .collect::<Result<_>>()?;
    Ok((target, indicators))
}

/// Forecasts of `origin + h` by one ADL agent per indicator. Each agent and
/// origin has its own random stream, so rows can be built in any order.
pub fn adl_archive_row(
    base: &AdlModelSpec,
    target: &TimeSeriesF,
    indicators: &[(String, TimeSeriesF)],
    origin: i64,
    seed: u64,
) -> Result<ArchiveRow> {
    let forecasts = indicators
        .iter()
        .enumerate()
        .map(|(k, (_, ind))| {
            let spec = AdlModelSpec {
                indicator_index: k,
                ..base.clone()
            };
            let mut rng = RngHandle::for_task(seed, k as u32, Step::AgentFit, origin.rem_euclid(1 << 39) as u64);
            Ok(AgentForecast::Draws(fit_adl_and_forecast(&spec, target, ind, origin, &mut rng)?.draws))
        })
        .collect::<Result<_>>()?;
    Ok(ArchiveRow {
        target_period: origin + base.horizon as i64,
        forecasts,
    })
}

/// Archive of the agents' forecasts for all origins in `first..=last`.
pub fn build_adl_archive(
    base: &AdlModelSpec,
    target: &TimeSeriesF,
    indicators: &[(String, TimeSeriesF)],
    first_origin: i64,
    last_origin: i64,
    seed: u64,
) -> Result<AgentForecastArchive> {
    let rows = (first_origin..=last_origin)
        .map(|o| adl_archive_row(base, target, indicators, o, seed))
        .collect::<Result<_>>()?;
    let labels = indicators.iter().map(|(n, _)| n.clone()).collect();
    AgentForecastArchive::new(base.horizon as u32, labels, rows)
}
