//! Agent densities evaluated inside the agent-draw MH ratio.

use crate::dist::normal_ln_pdf;
use crate::types::{AgentForecast, HistogramForecast};

/// Grid resolution of the binned kernel estimate.
pub const KDE_GRID: usize = 1024;
/// Smallest kernel bandwidth; guards agents whose draws are all equal.
pub const KDE_MIN_BANDWIDTH: f64 = 1e-6;
/// Kernel support in bandwidths.
const KDE_TRUNCATION: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub enum AgentDensity {
    Gaussian { mean: f64, sd: f64 },
    Histogram(HistogramForecast),
    Kernel(KernelDensity),
}

impl AgentDensity {
    /// Exact Gaussian when `analytic` and the forecast carries a summary,
    /// exact histogram density for histograms, kernel estimate otherwise.
    pub fn from_forecast(f: &AgentForecast, analytic: bool) -> Self {
        match f {
            AgentForecast::Histogram(h) => AgentDensity::Histogram(h.clone()),
            AgentForecast::Draws(d) => match d.analytic {
                Some(g) if analytic && g.sd > 0.0 => AgentDensity::Gaussian { mean: g.mean, sd: g.sd },
                _ => AgentDensity::Kernel(KernelDensity::new(&d.draws)),
            },
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        match self {
            AgentDensity::Gaussian { mean, sd } => normal_ln_pdf(x, *mean, sd * sd),
            AgentDensity::Histogram(h) => h.density(x).ln(),
            AgentDensity::Kernel(k) => k.ln_density(x),
        }
    }

    pub fn gaussian(&self) -> Option<(f64, f64)> {
        match self {
            AgentDensity::Gaussian { mean, sd } => Some((*mean, *sd)),
            _ => None,
        }
    }
}

/// Gaussian kernel density with Silverman's bandwidth, tabulated on a
/// linearly binned grid and evaluated exactly off the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelDensity {
    draws: Vec<f64>,
    bandwidth: f64,
    lo: f64,
    step: f64,
    grid: Vec<f64>,
}

pub fn silverman_bandwidth(draws: &[f64]) -> f64 {
    let n = draws.len() as f64;
    if draws.len() < 2 {
        return KDE_MIN_BANDWIDTH;
    }
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (n - 1.0) * p;
        let i = h.floor() as usize;
        let j = (i + 1).min(s.len() - 1);
        s[i] + (h - i as f64) * (s[j] - s[i])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * n.powf(-0.2)).max(KDE_MIN_BANDWIDTH)
}

impl KernelDensity {
    pub fn new(draws: &[f64]) -> Self {
        let bandwidth = silverman_bandwidth(draws);
        let (min, max) = draws
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        let lo = min - KDE_TRUNCATION * bandwidth;
        let hi = max + KDE_TRUNCATION * bandwidth;
        let step = (hi - lo) / (KDE_GRID - 1) as f64;

        let mut counts = vec![0.0; KDE_GRID];
        for x in draws {
            let u = (x - lo) / step;
            let i = (u.floor() as usize).min(KDE_GRID - 2);
            let frac = u - i as f64;
            counts[i] += 1.0 - frac;
            counts[i + 1] += frac;
        }
        let width = ((KDE_TRUNCATION * bandwidth / step).ceil() as usize).min(KDE_GRID - 1);
        let norm = 1.0 / (draws.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        let kernel: Vec<f64> = (0..=width)
            .map(|d| (-0.5 * (d as f64 * step / bandwidth).powi(2)).exp() * norm)
            .collect();
        let mut grid = vec![0.0; KDE_GRID];
        for (i, c) in counts.iter().enumerate().filter(|(_, c)| **c > 0.0) {
            let from = i.saturating_sub(width);
            let to = (i + width).min(KDE_GRID - 1);
            for (g, out) in grid.iter_mut().enumerate().take(to + 1).skip(from) {
                *out += c * kernel[g.abs_diff(i)];
            }
        }
        Self {
            draws: draws.to_vec(),
            bandwidth,
            lo,
            step,
            grid,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Direct evaluation over all draws.
    pub fn ln_density_exact(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let terms: Vec<f64> = self.draws.iter().map(|d| -0.5 * ((x - d) / h).powi(2)).collect();
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
        m + s.ln() - (self.draws.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        let u = (x - self.lo) / self.step;
        if u >= 0.0 && u <= (KDE_GRID - 1) as f64 {
            let i = (u.floor() as usize).min(KDE_GRID - 2);
            let frac = u - i as f64;
            let v = self.grid[i] * (1.0 - frac) + self.grid[i + 1] * frac;
            // deep in a tail the table underflows to zero
            if v > 1e-200 {
                return v.ln();
            }
        }
        self.ln_density_exact(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::std_normal;
    use crate::rng::RngHandle;

    #[test]
    fn binned_kde_matches_exact() {
        let mut rng = RngHandle::new(5, 0);
        let d: Vec<f64> = (0..500).map(|_| std_normal(&mut rng)).collect();
        let k = KernelDensity::new(&d);
        for x in [-2.5, -1.0, 0.0, 0.3, 1.7] {
            let a = k.ln_density(x);
            let b = k.ln_density_exact(x);
            assert!((a - b).abs() < 5e-3, "x {x}: {a} vs {b}");
        }
        assert!(k.ln_density(50.0).is_finite());
    }

    #[test]
    fn kde_integrates_to_one() {
        let d = vec![0.0, 1.0, 1.5, 4.0];
        let k = KernelDensity::new(&d);
        let n = 20000;
        let (a, b) = (-10.0, 15.0);
        let dx = (b - a) / n as f64;
        let total: f64 = (0..n).map(|i| k.ln_density(a + (i as f64 + 0.5) * dx).exp() * dx).sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn constant_draws_floor_bandwidth() {
        let k = KernelDensity::new(&[2.0; 10]);
        assert_eq!(k.bandwidth(), KDE_MIN_BANDWIDTH);
        assert!(k.ln_density(2.0).is_finite());
    }

    #[test]
    fn silverman_reference_value() {
        // sd = 1.2909944, IQR/1.34 = 1.119403 for 1..=4 with type-7 quartiles
        let h = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0]);
        let expect = 0.9 * (1.5f64 / 1.34) * 4f64.powf(-0.2);
        assert!((h - expect).abs() < 1e-12);
    }
}
