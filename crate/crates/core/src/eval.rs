//! Scoring rules, calibration and comparison tests, and summaries computed
//! from predictive draw sets.

use serde::{Deserialize, Serialize};

use crate::dist::normal_cdf;
use crate::error::{invalid, shape, Result};
use crate::rng::RngHandle;

/// Two-sided 5% critical value of the fluctuation test for a window of 10%
/// of the sample.
pub const FLUCTUATION_CRITICAL_10PCT: f64 = 3.393;

/// Asymptotic 95% Kolmogorov constant.
pub const KS_95: f64 = 1.358;

fn sorted(draws: &[f64]) -> Vec<f64> {
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// CRPS of the empirical distribution of `draws`, in the energy form
/// `E|X − y| − ½ E|X − X'|` over all ordered pairs (self-pairs included).
pub fn sample_crps(draws: &[f64], y: f64) -> Result<f64> {
    if draws.len() < 2 {
        return Err(shape(format!("CRPS needs at least 2 draws, got {}", draws.len())));
    }
    Ok(crps_sorted(&sorted(draws), y))
}

/// [`sample_crps`] on draws already sorted ascending.
pub fn crps_sorted(s: &[f64], y: f64) -> f64 {
    let n = s.len() as f64;
    let abs_y: f64 = s.iter().map(|x| (x - y).abs()).sum::<f64>() / n;
    // sum over i<j of (x_j - x_i) = sum_k x_(k) (2k - n + 1)
    let pair: f64 = s
        .iter()
        .enumerate()
        .map(|(k, x)| x * (2.0 * k as f64 - n + 1.0))
        .sum::<f64>();
    (abs_y - pair / (n * n)).max(0.0)
}

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    let h = (s.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileWeight {
    Uniform,
    Tails,
    Left,
    Right,
}

impl QuantileWeight {
    pub fn weight(self, a: f64) -> f64 {
        match self {
            QuantileWeight::Uniform => 1.0,
            QuantileWeight::Tails => (2.0 * a - 1.0).powi(2),
            QuantileWeight::Left => (1.0 - a).powi(2),
            QuantileWeight::Right => a * a,
        }
    }
}

/// Quantile score `2 (1{y < q} − α)(q − y)`.
#[inline]
pub fn quantile_score(q: f64, y: f64, alpha: f64) -> f64 {
    2.0 * (f64::from(u8::from(y < q)) - alpha) * (q - y)
}

/// Quantile-weighted CRPS on the grid α = 0.01, ..., 0.99.
pub fn quantile_weighted_crps(draws: &[f64], y: f64, weight: QuantileWeight) -> Result<f64> {
    if draws.len() < 2 {
        return Err(shape(format!("qwCRPS needs at least 2 draws, got {}", draws.len())));
    }
    Ok(qwcrps_sorted(&sorted(draws), y, weight))
}

pub fn qwcrps_sorted(s: &[f64], y: f64, weight: QuantileWeight) -> f64 {
    (1..=99)
        .map(|i| {
            let a = i as f64 / 100.0;
            weight.weight(a) * quantile_score(quantile_sorted(s, a), y, a)
        })
        .sum::<f64>()
        / 100.0
}

/// Per-origin scores of one forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub origin: i64,
    pub realized: f64,
    pub point: f64,
    pub crps: f64,
    pub qw_tails: f64,
    pub qw_left: f64,
    pub qw_right: f64,
    pub squared_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub rows: Vec<ScoreRow>,
}

impl ScoreSeries {
    /// Scores `draws[i]` against `realized[i]` at `origins[i]`.
    pub fn compute(origins: &[i64], draws: &[Vec<f64>], realized: &[f64]) -> Result<Self> {
        if origins.len() != draws.len() || draws.len() != realized.len() {
            return Err(shape("origins, draw sets and realizations differ in length"));
        }
        let rows = origins
            .iter()
            .zip(draws)
            .zip(realized)
            .map(|((o, d), y)| {
                if d.len() < 2 {
                    return Err(shape(format!("origin {o} has fewer than 2 draws")));
                }
                let s = sorted(d);
                let point = s.iter().sum::<f64>() / s.len() as f64;
                Ok(ScoreRow {
                    origin: *o,
                    realized: *y,
                    point,
                    crps: crps_sorted(&s, *y),
                    qw_tails: qwcrps_sorted(&s, *y, QuantileWeight::Tails),
                    qw_left: qwcrps_sorted(&s, *y, QuantileWeight::Left),
                    qw_right: qwcrps_sorted(&s, *y, QuantileWeight::Right),
                    squared_error: (point - y).powi(2),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn rmse(&self) -> f64 {
        (self.rows.iter().map(|r| r.squared_error).sum::<f64>() / self.rows.len() as f64).sqrt()
    }

    pub fn mean_crps(&self) -> f64 {
        self.rows.iter().map(|r| r.crps).sum::<f64>() / self.rows.len() as f64
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let f: fn(&ScoreRow) -> f64 = match name {
            "crps" => |r| r.crps,
            "qw_tails" => |r| r.qw_tails,
            "qw_left" => |r| r.qw_left,
            "qw_right" => |r| r.qw_right,
            "squared_error" => |r| r.squared_error,
            _ => return None,
        };
        Some(self.rows.iter().map(f).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitResult {
    pub values: Vec<f64>,
    /// `sup_u |F_n(u) − u|` of the PIT values.
    pub ks_statistic: f64,
    /// Half-width of the 95% band around the 45-degree line.
    pub band: f64,
}

impl PitResult {
    pub fn inside_band(&self) -> bool {
        self.ks_statistic <= self.band
    }

    /// Empirical CDF of the PITs at `grid` points.
    pub fn ecdf(&self, grid: &[f64]) -> Vec<f64> {
        let n = self.values.len() as f64;
        grid.iter()
            .map(|u| self.values.iter().filter(|v| **v <= *u).count() as f64 / n)
            .collect()
    }
}

/// Randomized PITs: uniform between the empirical CDF just below and at
/// the realization, which breaks ties with draws.
pub fn pits(draw_sets: &[Vec<f64>], realized: &[f64], rng: &mut RngHandle) -> Result<PitResult> {
    if draw_sets.len() != realized.len() {
        return Err(shape("draw sets and realizations differ in length"));
    }
    if draw_sets.len() < 20 {
        return Err(shape(format!("PIT test needs at least 20 origins, got {}", draw_sets.len())));
    }
    let mut values = Vec::with_capacity(realized.len());
    for (d, y) in draw_sets.iter().zip(realized) {
        if d.is_empty() {
            return Err(shape("empty draw set"));
        }
        let n = d.len() as f64;
        let below = d.iter().filter(|x| **x < *y).count() as f64 / n;
        let at_or_below = d.iter().filter(|x| **x <= *y).count() as f64 / n;
        values.push(below + rng.uniform() * (at_or_below - below));
    }
    let n = values.len();
    let s = sorted(&values);
    let ks = s
        .iter()
        .enumerate()
        .map(|(i, u)| ((i + 1) as f64 / n as f64 - u).max(u - i as f64 / n as f64))
        .fold(0.0, f64::max);
    Ok(PitResult {
        values,
        ks_statistic: ks,
        band: KS_95 / (n as f64).sqrt(),
    })
}

/// Two-sample Kolmogorov-Smirnov distance `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Bartlett-kernel long-run variance with truncation lag `lag`.
pub fn hac_variance(d: &[f64], lag: usize) -> f64 {
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    let gamma = |k: usize| d[k..].iter().zip(d).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n;
    let mut v = gamma(0);
    for k in 1..=lag.min(d.len().saturating_sub(1)) {
        v += 2.0 * (1.0 - k as f64 / (lag as f64 + 1.0)) * gamma(k);
    }
    v.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: Option<f64>,
    /// Zero long-run variance of the loss differential.
    pub degenerate: bool,
}

impl DmResult {
    /// Significance stars at the 10/5/1 percent levels.
    pub fn stars(&self) -> &'static str {
        match self.p_value {
            Some(p) if p < 0.01 => "***",
            Some(p) if p < 0.05 => "**",
            Some(p) if p < 0.10 => "*",
            _ => "",
        }
    }
}

fn differential(a: &[f64], b: &[f64], min_len: usize) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(shape("loss series differ in length"));
    }
    if a.len() < min_len {
        return Err(shape(format!("need at least {min_len} losses, got {}", a.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

fn is_degenerate(var: f64, mean: f64) -> bool {
    var <= (1e-12 * (1.0 + mean.abs())).powi(2)
}

/// Diebold-Mariano test of equal expected loss, Bartlett HAC with lag h − 1.
pub fn dm_test(losses_a: &[f64], losses_b: &[f64], horizon: usize) -> Result<DmResult> {
    let d = differential(losses_a, losses_b, 10)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = hac_variance(&d, horizon.saturating_sub(1));
    if is_degenerate(var, mean) {
        let statistic = if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY };
        return Ok(DmResult { statistic, p_value: None, degenerate: true });
    }
    let statistic = mean / (var / n).sqrt();
    let p = 2.0 * normal_cdf(-statistic.abs());
    Ok(DmResult { statistic, p_value: Some(p), degenerate: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationResult {
    /// Statistic for the windows starting at 0, 1, ..., n − m.
    pub statistics: Vec<f64>,
    pub window: usize,
    pub critical_value: f64,
    pub degenerate: bool,
}

/// Rolling standardized mean loss differential over windows of
/// `round(window_frac · n)` observations, scaled by the full-sample HAC sd.
pub fn fluctuation_test(
    losses_a: &[f64],
    losses_b: &[f64],
    window_frac: f64,
    horizon: usize,
    critical_value: f64,
) -> Result<FluctuationResult> {
    if !(window_frac > 0.0 && window_frac < 1.0) {
        return Err(invalid(format!("window fraction {window_frac} outside (0, 1)")));
    }
    let d = differential(losses_a, losses_b, 2)?;
    let m = ((window_frac * d.len() as f64).round() as usize).max(2);
    if d.len() < 2 * m {
        return Err(shape(format!("sample of {} too short for window {m}", d.len())));
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = hac_variance(&d, horizon.saturating_sub(1));
    let degenerate = is_degenerate(var, mean);
    let statistics = fluctuation_statistics(&d, m, if degenerate { 0.0 } else { var.sqrt() });
    Ok(FluctuationResult { statistics, window: m, critical_value, degenerate })
}

/// `√m · mean(d over the window) / sd`; a zero `sd` maps nonzero means to ±inf.
pub fn fluctuation_statistics(d: &[f64], m: usize, sd: f64) -> Vec<f64> {
    d.windows(m)
        .map(|w| {
            let mean = w.iter().sum::<f64>() / m as f64;
            if sd > 0.0 {
                (m as f64).sqrt() * mean / sd
            } else if mean == 0.0 {
                0.0
            } else {
                mean.signum() * f64::INFINITY
            }
        })
        .collect()
}

/// Per origin and bin `[e_k, e_{k+1})` (last bin closed), empirical
/// probability under `a` minus that under `b`.
pub fn probability_difference_map(a: &[Vec<f64>], b: &[Vec<f64>], edges: &[f64]) -> Result<Vec<Vec<f64>>> {
    if a.len() != b.len() {
        return Err(shape("draw-set sequences differ in length"));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("bin edges must be strictly increasing with at least two entries"));
    }
    let probs = |d: &[f64]| -> Vec<f64> {
        let k = edges.len() - 1;
        let mut c = vec![0.0; k];
        for x in d {
            if *x < edges[0] || *x > edges[k] {
                continue;
            }
            let i = edges.partition_point(|e| e <= x).saturating_sub(1).min(k - 1);
            c[i] += 1.0;
        }
        let n = d.len() as f64;
        c.iter().map(|v| v / n).collect()
    };
    Ok(a.iter()
        .zip(b)
        .map(|(da, db)| probs(da).iter().zip(probs(db)).map(|(x, y)| x - y).collect())
        .collect())
}

/// `((q95 − q50) − (q50 − q5)) / (q95 − q5)`; `None` when `q95 = q5`.
pub fn quantile_skewness(draws: &[f64]) -> Result<Option<f64>> {
    if draws.len() < 100 {
        return Err(shape(format!("quantile skewness needs at least 100 draws, got {}", draws.len())));
    }
    let s = sorted(draws);
    let (q5, q50, q95) = (quantile_sorted(&s, 0.05), quantile_sorted(&s, 0.5), quantile_sorted(&s, 0.95));
    if q95 <= q5 {
        return Ok(None);
    }
    Ok(Some((((q95 - q50) - (q50 - q5)) / (q95 - q5)).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSplitPolicy {
    /// A draw without splits spreads its share evenly across modifiers.
    Uniform,
    /// Draws without splits are left out of the average.
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionSummary {
    pub shares: Vec<f64>,
    pub mean_total_splits: f64,
}

/// Posterior mean split shares per modifier from per-draw split counts.
pub fn modifier_inclusion(split_counts: &[Vec<usize>], policy: ZeroSplitPolicy) -> Result<InclusionSummary> {
    let k = split_counts.first().map_or(0, Vec::len);
    if split_counts.iter().any(|c| c.len() != k) {
        return Err(shape("split-count vectors differ in length"));
    }
    let mut shares = vec![0.0; k];
    let mut used = 0usize;
    let mut total = 0.0;
    for c in split_counts {
        let s: usize = c.iter().sum();
        total += s as f64;
        if s == 0 {
            if policy == ZeroSplitPolicy::Drop || k == 0 {
                continue;
            }
            shares.iter_mut().for_each(|x| *x += 1.0 / k as f64);
        } else {
            for (x, n) in shares.iter_mut().zip(c) {
                *x += *n as f64 / s as f64;
            }
        }
        used += 1;
    }
    if used > 0 {
        shares.iter_mut().for_each(|x| *x /= used as f64);
    }
    let n = split_counts.len().max(1) as f64;
    Ok(InclusionSummary { shares, mean_total_splits: total / n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sample_normal, std_normal};

    fn brute_crps(d: &[f64], y: f64) -> f64 {
        let n = d.len() as f64;
        let a: f64 = d.iter().map(|x| (x - y).abs()).sum::<f64>() / n;
        let mut b = 0.0;
        for x in d {
            for z in d {
                b += (x - z).abs();
            }
        }
        a - 0.5 * b / (n * n)
    }

    #[test]
    fn crps_two_point() {
        assert!((sample_crps(&[0.0, 1.0], 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(sample_crps(&[2.0, 2.0, 2.0], 2.0).unwrap(), 0.0);
        assert!(sample_crps(&[1.0], 0.0).is_err());
    }

    #[test]
    fn crps_matches_brute_force() {
        let d = [0.3, -1.2, 4.0, 0.3, 2.2, -0.7];
        for y in [-2.0, 0.0, 0.3, 5.0] {
            assert!((sample_crps(&d, y).unwrap() - brute_crps(&d, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn crps_gaussian_at_mean() {
        let mut r = RngHandle::new(71, 0);
        let d: Vec<f64> = (0..100_000).map(|_| std_normal(&mut r)).collect();
        let exact = 2.0 * (-crate::dist::LN_SQRT_2PI).exp() - 1.0 / std::f64::consts::PI.sqrt();
        assert!((exact - 0.23370).abs() < 1e-5);
        assert!((sample_crps(&d, 0.0).unwrap() - exact).abs() < 0.005);
    }

    #[test]
    fn qwcrps_uniform_matches_crps() {
        let mut r = RngHandle::new(72, 0);
        let d: Vec<f64> = (0..100_000).map(|_| std_normal(&mut r)).collect();
        let a = quantile_weighted_crps(&d, 0.0, QuantileWeight::Uniform).unwrap();
        let b = sample_crps(&d, 0.0).unwrap();
        assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
    }

    #[test]
    fn qwcrps_left_right_symmetric() {
        let d: Vec<f64> = (-50..=50).map(|i| i as f64 / 10.0).collect();
        let l = quantile_weighted_crps(&d, 0.0, QuantileWeight::Left).unwrap();
        let r = quantile_weighted_crps(&d, 0.0, QuantileWeight::Right).unwrap();
        assert!((l - r).abs() < 1e-10);
    }

    #[test]
    fn tails_weight_forgives_center_miss() {
        // forecast is right everywhere except its center, which is shifted
        let d: Vec<f64> = (-50..=50)
            .map(|i| {
                let x = i as f64 / 10.0;
                if x.abs() < 1.0 { x + 0.8 } else { x }
            })
            .collect();
        let t = quantile_weighted_crps(&d, 0.0, QuantileWeight::Tails).unwrap();
        let u = quantile_weighted_crps(&d, 0.0, QuantileWeight::Uniform).unwrap();
        assert!(t < u);
    }

    #[test]
    fn pits_extremes_and_range() {
        let mut r = RngHandle::new(73, 0);
        let sets: Vec<Vec<f64>> = (0..25).map(|_| vec![0.0, 1.0, 2.0]).collect();
        let res = pits(&sets, &[10.0; 25], &mut r).unwrap();
        assert!(res.values.iter().all(|p| *p == 1.0));
        let y: Vec<f64> = (0..25).map(|i| i as f64 / 10.0 - 0.5).collect();
        let res = pits(&sets, &y, &mut r).unwrap();
        assert!(res.values.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(pits(&sets[..10], &y[..10], &mut r).is_err());
    }

    #[test]
    fn dm_degenerate_cases() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let r = dm_test(&a, &a, 1).unwrap();
        assert!(r.degenerate && r.statistic == 0.0 && r.p_value.is_none());
        let b: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        let r = dm_test(&b, &a, 2).unwrap();
        assert!(r.degenerate && r.p_value.is_none());
    }

    #[test]
    fn dm_power_matches_normal_theory() {
        // differential N(0.5, 1), n = 400: E[stat] = 10, so the analytic
        // power at 5% is essentially one
        let mut r = RngHandle::new(74, 0);
        let reps = 500;
        let mut rejections = 0;
        for _ in 0..reps {
            let a: Vec<f64> = (0..400).map(|_| sample_normal(0.5, 1.0, &mut r).unwrap()).collect();
            let res = dm_test(&a, &[0.0; 400], 1).unwrap();
            if res.p_value.unwrap() < 0.05 {
                rejections += 1;
            }
        }
        let power = 1.0 - normal_cdf(1.959_964 - 10.0) + normal_cdf(-1.959_964 - 10.0);
        let freq = rejections as f64 / reps as f64;
        let band = 1.96 * (power * (1.0 - power) / reps as f64).sqrt() + 1.0 / reps as f64;
        assert!((freq - power).abs() <= band, "{freq} vs {power}");
    }

    #[test]
    fn dm_size_under_null() {
        let mut r = RngHandle::new(75, 0);
        let reps = 2000;
        let mut rej = 0;
        for _ in 0..reps {
            let a: Vec<f64> = (0..200).map(|_| std_normal(&mut r)).collect();
            if dm_test(&a, &[0.0; 200], 1).unwrap().p_value.unwrap() < 0.05 {
                rej += 1;
            }
        }
        let f = rej as f64 / reps as f64;
        assert!((f - 0.05).abs() < 3.0 * (0.05f64 * 0.95 / reps as f64).sqrt() + 0.005, "{f}");
    }

    #[test]
    fn fluctuation_bookkeeping() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let r = fluctuation_test(&a, &a, 0.1, 1, FLUCTUATION_CRITICAL_10PCT).unwrap();
        assert!(r.statistics.iter().all(|s| *s == 0.0));
        assert_eq!(r.statistics.len(), 50 - r.window + 1);
        let s = fluctuation_statistics(&[1.0; 30], 5, 1.0);
        assert!(s.iter().all(|v| (v - 5f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn difference_map() {
        let edges = [0.0, 1.0, 2.0, 3.0];
        let a = vec![vec![0.5, 1.5, 2.5, 0.2]];
        let z = probability_difference_map(&a, &a, &edges).unwrap();
        assert!(z[0].iter().all(|v| *v == 0.0));
        let b = vec![vec![2.5; 4]];
        let m = probability_difference_map(&[vec![0.5; 4]], &b, &edges).unwrap();
        assert_eq!(m[0], vec![1.0, 0.0, -1.0]);
        let m = probability_difference_map(&a, &b, &edges).unwrap();
        assert!(m[0].iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn skewness_values() {
        let mut r = RngHandle::new(76, 0);
        let d: Vec<f64> = (0..100_000).map(|_| std_normal(&mut r)).collect();
        assert!(quantile_skewness(&d).unwrap().unwrap().abs() < 0.02);
        let e: Vec<f64> = (0..100_000).map(|_| -(r.uniform_open()).ln()).collect();
        let s = quantile_skewness(&e).unwrap().unwrap();
        let (q5, q50, q95) = (-(0.95f64).ln(), 2f64.ln(), 20f64.ln());
        let exact = (q95 - 2.0 * q50 + q5) / (q95 - q5);
        assert!(s > 0.0 && (s - exact).abs() < 0.02, "{s} vs {exact}");
        assert!(quantile_skewness(&[1.0; 200]).unwrap().is_none());
    }

    #[test]
    fn inclusion_shares() {
        let r = modifier_inclusion(&[vec![3], vec![1], vec![0]], ZeroSplitPolicy::Uniform).unwrap();
        assert_eq!(r.shares, vec![1.0]);
        let r = modifier_inclusion(&[vec![1, 3], vec![2, 2]], ZeroSplitPolicy::Uniform).unwrap();
        assert!((r.shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r.shares[0] - 0.375).abs() < 1e-12);
        let r = modifier_inclusion(&vec![vec![0, 0]; 4], ZeroSplitPolicy::Drop).unwrap();
        assert_eq!(r.mean_total_splits, 0.0);
    }

    #[test]
    fn ks_two_sample_oracle() {
        // brute force over all jump points
        let a = [0.1, 0.4, 0.4, 0.9];
        let b = [0.2, 0.4, 0.8];
        let f = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
        let brute = a.iter().chain(&b).map(|x| (f(&a, *x) - f(&b, *x)).abs()).fold(0.0, f64::max);
        assert!((ks_two_sample(&a, &b) - brute).abs() < 1e-15);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }
}
