use serde::{Deserialize, Serialize};

use crate::dist::std_normal;
use crate::error::{invalid, Result};
use crate::rng::{RngHandle, Step};
use crate::types::{AgentForecast, AgentForecastArchive, ArchiveRow, DrawMatrix, GaussianSummary, TimeSeriesF};

/// Two-regime threshold AR(2). Periods 0 and 1 hold the fixed starting
/// values; periods `2..=t_len` are simulated, in regime 1 up to `break_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyDgpConfig {
    pub rho1: f64,
    pub rho2: f64,
    pub sigma0: f64,
    pub c: f64,
    pub t_len: usize,
    pub break_t: usize,
    pub y0: f64,
    pub y1: f64,
    /// Draws stored per agent and target.
    pub draws_per_forecast: usize,
}

impl Default for ToyDgpConfig {
    fn default() -> Self {
        Self {
            rho1: 0.8,
            rho2: -0.8,
            sigma0: 1.2,
            c: 0.01,
            t_len: 350,
            break_t: 200,
            y0: 0.0,
            y1: 0.0,
            draws_per_forecast: 1000,
        }
    }
}

impl ToyDgpConfig {
    /// AR coefficients on `(y_{t-1}, y_{t-2})` in force at period `t`.
    pub fn coefficients(&self, t: usize) -> (f64, f64) {
        if t <= self.break_t {
            (self.rho1, self.c * self.rho2)
        } else {
            (self.c * self.rho1, self.rho2)
        }
    }

    /// The agent that is nearly correct at period `t` (0 or 1).
    pub fn better_agent(&self, t: usize) -> usize {
        usize::from(t > self.break_t)
    }

    pub fn agent_sds(&self) -> (f64, f64) {
        (
            ((1.0 - self.rho1 * self.rho1) * self.sigma0 * self.sigma0).sqrt(),
            ((1.0 - self.rho2 * self.rho2) * self.sigma0 * self.sigma0).sqrt(),
        )
    }

    fn validate(&self) -> Result<()> {
        if self.t_len < 3 || self.draws_per_forecast == 0 || !(self.sigma0 >= 0.0) {
            return Err(invalid("toy DGP needs t_len >= 3, a positive draw count and sigma0 >= 0"));
        }
        Ok(())
    }
}

/// Simulated target (periods `0..=t_len`) and the two agents' one-step
/// forecasts for targets `2..=t_len`. Agent 1 forecasts with
/// `N(ρ₁ y_{t−1}, (1−ρ₁²)σ₀²)`, agent 2 with `N(ρ₂ y_{t−2}, (1−ρ₂²)σ₀²)`.
pub fn simulate_toy(cfg: &ToyDgpConfig, seed: u64) -> Result<(TimeSeriesF, AgentForecastArchive)> {
    cfg.validate()?;
    let y = simulate_toy_series(cfg, &mut RngHandle::for_step(seed, 0, Step::Simulation));
    let (sd1, sd2) = cfg.agent_sds();
    let mut rng = RngHandle::for_step(seed, 0, Step::AgentFit);
    let gauss = |mean: f64, sd: f64, rng: &mut RngHandle| {
        let draws = (0..cfg.draws_per_forecast).map(|_| mean + sd * std_normal(rng)).collect();
        AgentForecast::Draws(DrawMatrix {
            draws,
            analytic: Some(GaussianSummary { mean, sd }),
        })
    };
    let rows = (2..=cfg.t_len)
        .map(|t| ArchiveRow {
            target_period: t as i64,
            forecasts: vec![
                gauss(cfg.rho1 * y[t - 1], sd1, &mut rng),
                gauss(cfg.rho2 * y[t - 2], sd2, &mut rng),
            ],
        })
        .collect();
    let archive = AgentForecastArchive::new(1, vec!["agent1".into(), "agent2".into()], rows)?;
    Ok((TimeSeriesF::new(y, 0, "period")?, archive))
}

/// The target path alone, periods `0..=t_len`.
pub fn simulate_toy_series(cfg: &ToyDgpConfig, rng: &mut RngHandle) -> Vec<f64> {
    let mut y = vec![0.0; cfg.t_len + 1];
    y[0] = cfg.y0;
    y[1] = cfg.y1;
    for t in 2..=cfg.t_len {
        let (a1, a2) = cfg.coefficients(t);
        y[t] = a1 * y[t - 1] + a2 * y[t - 2] + cfg.sigma0 * std_normal(rng);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_recursion() {
        let cfg = ToyDgpConfig {
            sigma0: 0.0,
            y0: 0.5,
            y1: 1.0,
            ..ToyDgpConfig::default()
        };
        let (y, arch) = simulate_toy(&cfg, 1).unwrap();
        let y = y.values();
        for t in 2..=200 {
            assert_eq!(y[t], 0.8 * y[t - 1] + (-0.008) * y[t - 2]);
        }
        for t in 201..=350 {
            assert_eq!(y[t], 0.008 * y[t - 1] + (-0.8) * y[t - 2]);
        }
        assert_eq!(arch.first_target(), Some(2));
        assert_eq!(arch.last_target(), Some(350));
    }

    #[test]
    fn default_start_is_zero() {
        let cfg = ToyDgpConfig { sigma0: 0.0, ..ToyDgpConfig::default() };
        let (y, _) = simulate_toy(&cfg, 1).unwrap();
        assert!(y.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn agent_one_draw_variance() {
        let (_, arch) = simulate_toy(&ToyDgpConfig::default(), 2).unwrap();
        let AgentForecast::Draws(d) = &arch.row(100).unwrap().forecasts[0] else {
            panic!("draws expected")
        };
        let n = d.draws.len() as f64;
        let m = d.draws.iter().sum::<f64>() / n;
        let v = d.draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let target: f64 = (1.0 - 0.64) * 1.44;
        assert!((target - 0.5184).abs() < 1e-12);
        assert!((v - target).abs() < 3.0 * target * (2.0 / n).sqrt(), "var {v}");
    }

    #[test]
    fn better_agent_switches_at_break() {
        let cfg = ToyDgpConfig::default();
        assert_eq!(cfg.better_agent(200), 0);
        assert_eq!(cfg.better_agent(201), 1);
    }
}
