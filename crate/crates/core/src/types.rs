//! Shared domain types.

use serde::{Deserialize, Serialize};

use crate::dist;
use crate::error::{invalid, shape, BpsError, Result};
use crate::rng::RngHandle;

/// A univariate series with an integer period label for its first value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesF {
    values: Vec<f64>,
    start_index: i64,
    frequency_label: String,
}

impl TimeSeriesF {
    pub fn new(values: Vec<f64>, start_index: i64, frequency_label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(shape("time series must have at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at position {i}")));
        }
        Ok(Self {
            values,
            start_index,
            frequency_label: frequency_label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn end_index(&self) -> i64 {
        self.start_index + self.values.len() as i64 - 1
    }

    pub fn frequency_label(&self) -> &str {
        &self.frequency_label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at period label `t`, if covered.
    pub fn at(&self, t: i64) -> Option<f64> {
        let k = t - self.start_index;
        if k < 0 {
            return None;
        }
        self.values.get(k as usize).copied()
    }
}

/// Piecewise-uniform predictive density over closed, finite bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramForecast {
    bin_edges: Vec<f64>,
    probabilities: Vec<f64>,
}

pub const HISTOGRAM_SUM_TOL: f64 = 1e-10;

impl HistogramForecast {
    pub fn new(bin_edges: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if bin_edges.len() < 2 || probabilities.len() + 1 != bin_edges.len() {
            return Err(shape(format!(
                "histogram has {} edges and {} probabilities",
                bin_edges.len(),
                probabilities.len()
            )));
        }
        if bin_edges.iter().any(|e| !e.is_finite()) {
            return Err(invalid("histogram edges must be finite (resolve open bins first)"));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("histogram edges must be strictly increasing"));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("histogram probabilities must be nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > HISTOGRAM_SUM_TOL {
            return Err(BpsError::Validation(format!(
                "histogram probabilities sum to {total}"
            )));
        }
        Ok(Self {
            bin_edges,
            probabilities,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Density at `x`; zero outside the outer edges.
    pub fn density(&self, x: f64) -> f64 {
        let e = &self.bin_edges;
        if x < e[0] || x > e[e.len() - 1] {
            return 0.0;
        }
        let k = match e.partition_point(|v| *v <= x) {
            0 => 0,
            k => (k - 1).min(self.probabilities.len() - 1),
        };
        self.probabilities[k] / (e[k + 1] - e[k])
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let e = &self.bin_edges;
        let mut acc = 0.0;
        for (k, p) in self.probabilities.iter().enumerate() {
            if x >= e[k + 1] {
                acc += p;
            } else if x > e[k] {
                acc += p * (x - e[k]) / (e[k + 1] - e[k]);
            }
        }
        acc.min(1.0)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let e = &self.bin_edges;
        let mut acc = 0.0;
        for (k, p) in self.probabilities.iter().enumerate() {
            if *p > 0.0 && acc + p >= q {
                let frac = ((q - acc) / p).clamp(0.0, 1.0);
                return e[k] + frac * (e[k + 1] - e[k]);
            }
            acc += p;
        }
        e[e.len() - 1]
    }

    /// Raw moment `E[X^k]` of the piecewise-uniform density.
    pub fn raw_moment(&self, k: i32) -> f64 {
        let e = &self.bin_edges;
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (a, b) = (e[i], e[i + 1]);
                p * (b.powi(k + 1) - a.powi(k + 1)) / ((k + 1) as f64 * (b - a))
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    pub mean: f64,
    pub sd: f64,
}

/// Posterior-predictive draws of one agent for one target, optionally with
/// the analytic Gaussian it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawMatrix {
    pub draws: Vec<f64>,
    pub analytic: Option<GaussianSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentForecast {
    Draws(DrawMatrix),
    Histogram(HistogramForecast),
}

/// Mean, variance, skewness and excess kurtosis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    pub fn of_sample(xs: &[f64]) -> Moments {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        from_central(mean, m2, m3, m4)
    }
}

fn from_central(mean: f64, m2: f64, m3: f64, m4: f64) -> Moments {
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Moments {
        mean,
        variance: m2,
        skewness,
        excess_kurtosis,
    }
}

impl AgentForecast {
    pub fn mean(&self) -> f64 {
        match self {
            AgentForecast::Draws(d) => d.draws.iter().sum::<f64>() / d.draws.len() as f64,
            AgentForecast::Histogram(h) => h.raw_moment(1),
        }
    }

    pub fn moments(&self) -> Moments {
        match self {
            AgentForecast::Draws(d) => Moments::of_sample(&d.draws),
            AgentForecast::Histogram(h) => {
                let m1 = h.raw_moment(1);
                let m2 = h.raw_moment(2);
                let m3 = h.raw_moment(3);
                let m4 = h.raw_moment(4);
                let c2 = m2 - m1 * m1;
                let c3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
                let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
                from_central(m1, c2.max(0.0), c3, c4.max(0.0))
            }
        }
    }

    /// Deterministic sample representing the forecast: the draws themselves,
    /// or `n` mid-quantiles of a histogram.
    pub fn representative_draws(&self, n: usize) -> Vec<f64> {
        match self {
            AgentForecast::Draws(d) => d.draws.clone(),
            AgentForecast::Histogram(h) => (0..n)
                .map(|i| h.quantile((i as f64 + 0.5) / n as f64))
                .collect(),
        }
    }

    /// One unconditional draw from the forecast.
    pub fn sample(&self, rng: &mut RngHandle) -> f64 {
        match self {
            AgentForecast::Draws(d) => match d.analytic {
                Some(g) => g.mean + g.sd * dist::std_normal(rng),
                None => d.draws[rng.below(d.draws.len())],
            },
            AgentForecast::Histogram(h) => dist::draw_from_histogram(h, rng),
        }
    }

    pub fn draw_count(&self) -> Option<usize> {
        match self {
            AgentForecast::Draws(d) => Some(d.draws.len()),
            AgentForecast::Histogram(_) => None,
        }
    }
}

/// All agents' forecasts of one target period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRow {
    /// Period being forecast; the forecasts were formed at `target_period - horizon`.
    pub target_period: i64,
    pub forecasts: Vec<AgentForecast>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentForecastArchive {
    horizon: u32,
    agent_labels: Vec<String>,
    rows: Vec<ArchiveRow>,
}

impl AgentForecastArchive {
    pub fn new(horizon: u32, agent_labels: Vec<String>, mut rows: Vec<ArchiveRow>) -> Result<Self> {
        if horizon < 1 {
            return Err(invalid("horizon must be at least 1"));
        }
        let j = agent_labels.len();
        if j == 0 {
            return Err(shape("archive needs at least one agent"));
        }
        rows.sort_by_key(|r| r.target_period);
        for w in rows.windows(2) {
            if w[0].target_period == w[1].target_period {
                return Err(shape(format!("duplicate target period {}", w[0].target_period)));
            }
        }
        for r in &rows {
            if r.forecasts.len() != j {
                return Err(shape(format!(
                    "target {} has {} agents, expected {j}",
                    r.target_period,
                    r.forecasts.len()
                )));
            }
            let counts: Vec<usize> = r.forecasts.iter().filter_map(|f| f.draw_count()).collect();
            if counts.windows(2).any(|w| w[0] != w[1]) {
                return Err(shape(format!(
                    "unequal draw counts across agents at target {}",
                    r.target_period
                )));
            }
            if counts.contains(&0) {
                return Err(shape(format!("empty draw set at target {}", r.target_period)));
            }
        }
        Ok(Self {
            horizon,
            agent_labels,
            rows,
        })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn agent_labels(&self) -> &[String] {
        &self.agent_labels
    }

    pub fn n_agents(&self) -> usize {
        self.agent_labels.len()
    }

    pub fn rows(&self) -> &[ArchiveRow] {
        &self.rows
    }

    pub fn row(&self, target_period: i64) -> Option<&ArchiveRow> {
        self.rows
            .binary_search_by_key(&target_period, |r| r.target_period)
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn first_target(&self) -> Option<i64> {
        self.rows.first().map(|r| r.target_period)
    }

    pub fn last_target(&self) -> Option<i64> {
        self.rows.last().map(|r| r.target_period)
    }

    /// Rows for the contiguous target range `[from, to]`.
    pub fn range(&self, from: i64, to: i64) -> Result<Vec<&ArchiveRow>> {
        (from..=to)
            .map(|t| {
                self.row(t)
                    .ok_or_else(|| shape(format!("archive has no forecasts for target {t}")))
            })
            .collect()
    }

    /// Same agents, only the rows with targets in `[from, to]`.
    pub fn restrict(&self, from: i64, to: i64) -> AgentForecastArchive {
        AgentForecastArchive {
            horizon: self.horizon,
            agent_labels: self.agent_labels.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| r.target_period >= from && r.target_period <= to)
                .cloned()
                .collect(),
        }
    }
}

/// MCMC budget; retained draws are `(n_total - n_burn) / thin` per chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub n_total: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub n_chains: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_total: 12_500,
            n_burn: 2_500,
            thin: 2,
            n_chains: 2,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(BpsError::config("mcmc.thin", "must be at least 1"));
        }
        if self.n_chains == 0 {
            return Err(BpsError::config("mcmc.n_chains", "must be at least 1"));
        }
        if self.n_burn >= self.n_total {
            return Err(BpsError::config("mcmc.n_burn", "must be below n_total"));
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate), and also requires at least 100 retained draws.
    pub fn validate_production(&self) -> Result<()> {
        self.validate()?;
        if self.retained_per_chain() < 100 {
            return Err(BpsError::config(
                "mcmc",
                "(n_total - n_burn) / thin must be at least 100",
            ));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_total - self.n_burn) / self.thin
    }

    /// Whether sweep `iter` (0-based) is kept.
    pub fn keeps(&self, iter: usize) -> bool {
        iter >= self.n_burn && (iter - self.n_burn + 1) % self.thin == 0
    }
}

/// Dense row-major matrix used for modifier panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.cols + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[i * self.cols + k] = v;
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, k)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Appends the columns of `other` (same row count).
    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols == 0 {
            return Ok(other.clone());
        }
        if other.cols == 0 {
            return Ok(self.clone());
        }
        if self.rows != other.rows {
            return Err(shape("hcat row mismatch"));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_rejects_bad_input() {
        assert!(HistogramForecast::new(vec![0.0, 1.0], vec![0.5]).is_err());
        assert!(HistogramForecast::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(HistogramForecast::new(vec![0.0, 1.0, 2.0], vec![1.0]).is_err());
        assert!(HistogramForecast::new(vec![f64::NEG_INFINITY, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn histogram_cdf_quantile_inverse() {
        let h = HistogramForecast::new(vec![-1.0, 0.0, 2.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        for q in [0.05, 0.2, 0.3, 0.69, 0.95] {
            assert!((h.cdf(h.quantile(q)) - q).abs() < 1e-12);
        }
        assert_eq!(h.density(-2.0), 0.0);
        assert!((h.density(1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn two_point_moments() {
        let m = Moments::of_sample(&[-1.0, 1.0]);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 1.0);
        assert_eq!(m.skewness, 0.0);
    }

    #[test]
    fn mcmc_defaults_keep_5000() {
        let c = McmcConfig::default();
        assert_eq!(c.retained_per_chain(), 5000);
        assert_eq!((0..c.n_total).filter(|i| c.keeps(*i)).count(), 5000);
        let tiny = McmcConfig {
            n_total: 12,
            n_burn: 10,
            thin: 2,
            n_chains: 1,
        };
        assert_eq!((0..tiny.n_total).filter(|i| tiny.keeps(*i)).count(), 1);
        assert!(tiny.validate_production().is_err());
        assert!(McmcConfig { n_burn: 12, ..tiny }.validate().is_err());
    }

    #[test]
    fn archive_requires_all_agents() {
        let f = AgentForecast::Draws(DrawMatrix {
            draws: vec![1.0, 2.0],
            analytic: None,
        });
        let g = AgentForecast::Draws(DrawMatrix {
            draws: vec![1.0],
            analytic: None,
        });
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(AgentForecastArchive::new(
            1,
            labels.clone(),
            vec![ArchiveRow {
                target_period: 1,
                forecasts: vec![f.clone()]
            }]
        )
        .is_err());
        assert!(AgentForecastArchive::new(
            1,
            labels.clone(),
            vec![ArchiveRow {
                target_period: 1,
                forecasts: vec![f.clone(), g]
            }]
        )
        .is_err());
        assert!(AgentForecastArchive::new(
            1,
            labels,
            vec![ArchiveRow {
                target_period: 1,
                forecasts: vec![f.clone(), f]
            }]
        )
        .is_ok());
    }
}
