//! Weight-modifier panels. `z_gamma` has one row per agent; `z_beta` has
//! one row per (target period, agent), stored period-major, so row
//! `t * J + j` belongs to agent `j` at the `t`-th target of the panel.
//!
//! Real-time discipline: a panel built at cutoff `T` only reads
//! realizations dated `T` or earlier.

use serde::{Deserialize, Serialize};

use crate::error::{shape, BpsError, Result};
use crate::eval::crps_sorted;
use crate::types::{AgentForecastArchive, Matrix, TimeSeriesF};

/// Mid-quantile sample size used to score histogram forecasts.
const HISTOGRAM_SCORE_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModifierSpec {
    /// Averaged past scores drive the constant weights only.
    AvgScores,
    /// Horizon-lagged exogenous indicators plus a time trend.
    ExoInd,
    /// Averaged scores for `z_gamma`; moments, dispersion and lagged scores for `z_beta`.
    Features,
    /// Union of `ExoInd` and `Features`.
    All,
    /// Trend, lagged squared error and lagged CRPS, as in the threshold example.
    Toy,
}

impl std::str::FromStr for ModifierSpec {
    type Err = BpsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '.'], "_").as_str() {
            "avg_scores" => Ok(Self::AvgScores),
            "exo_ind" => Ok(Self::ExoInd),
            "features" => Ok(Self::Features),
            "all" => Ok(Self::All),
            "toy" => Ok(Self::Toy),
            other => Err(BpsError::config("modifier_spec", format!("unknown specification {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Score,
    Feature,
    Exogenous,
    Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub label: String,
    pub tag: Provenance,
    /// `(center, scale)` when the column was standardized; raw = z * scale + center.
    pub standardization: Option<(f64, f64)>,
}

impl ColumnInfo {
    fn new(label: impl Into<String>, tag: Provenance) -> Self {
        Self {
            label: label.into(),
            tag,
            standardization: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifierPanel {
    pub n_agents: usize,
    /// Target periods covered by `z_beta`, in row-block order.
    pub targets: Vec<i64>,
    pub z_gamma: Matrix,
    pub z_beta: Matrix,
    pub gamma_columns: Vec<ColumnInfo>,
    pub beta_columns: Vec<ColumnInfo>,
}

impl ModifierPanel {
    pub fn k_gamma(&self) -> usize {
        self.z_gamma.cols()
    }

    pub fn k_beta(&self) -> usize {
        self.z_beta.cols()
    }

    /// `z_beta` rows of the targets at positions `[from, to)`.
    pub fn beta_block(&self, from: usize, to: usize) -> Matrix {
        let j = self.n_agents;
        let k = self.k_beta();
        let data = self.z_beta.data()[from * j * k..to * j * k].to_vec();
        Matrix::from_rows((to - from) * j, k, data).expect("block of a valid matrix")
    }

    /// Affine standardization of every non-constant column to mean 0, sd 1,
    /// recording the transform.
    pub fn standardize(&mut self) {
        standardize_matrix(&mut self.z_gamma, &mut self.gamma_columns);
        standardize_matrix(&mut self.z_beta, &mut self.beta_columns);
    }
}

fn standardize_matrix(m: &mut Matrix, cols: &mut [ColumnInfo]) {
    for (k, info) in cols.iter_mut().enumerate() {
        if info.standardization.is_some() || m.rows() == 0 {
            continue;
        }
        let c = m.column(k);
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let sd = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let scale = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..m.rows() {
            m.set(i, k, (m.get(i, k) - mean) / scale);
        }
        info.standardization = Some((mean, scale));
    }
}

/// Per-agent squared forecast error (draw mean as point forecast) and CRPS
/// for every archive target with a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentScoreHistory {
    pub targets: Vec<i64>,
    pub sfe: Vec<Vec<f64>>,
    pub crps: Vec<Vec<f64>>,
}

impl AgentScoreHistory {
    pub fn compute(archive: &AgentForecastArchive, realized: &TimeSeriesF) -> Result<Self> {
        let mut out = Self {
            targets: vec![],
            sfe: vec![],
            crps: vec![],
        };
        for row in archive.rows() {
            let Some(y) = realized.at(row.target_period) else {
                continue;
            };
            let mut sfe = Vec::with_capacity(row.forecasts.len());
            let mut crps = Vec::with_capacity(row.forecasts.len());
            for f in &row.forecasts {
                let mut d = f.representative_draws(HISTOGRAM_SCORE_DRAWS);
                if d.len() < 2 {
                    return Err(shape(format!("target {} has an agent with fewer than 2 draws", row.target_period)));
                }
                d.sort_by(f64::total_cmp);
                let mean = d.iter().sum::<f64>() / d.len() as f64;
                sfe.push((y - mean).powi(2));
                crps.push(crps_sorted(&d, y));
            }
            out.targets.push(row.target_period);
            out.sfe.push(sfe);
            out.crps.push(crps);
        }
        Ok(out)
    }

    fn index(&self, target: i64) -> Option<usize> {
        self.targets.binary_search(&target).ok()
    }

    /// Number of scored targets dated at or before `cutoff`.
    fn count_upto(&self, cutoff: i64) -> usize {
        self.targets.partition_point(|t| *t <= cutoff)
    }
}

/// Per agent, the mean SFE and mean CRPS over scored targets up to `cutoff`
/// (`J × 2`). With no history yet every entry is 0.
pub fn build_avg_scores(history: &AgentScoreHistory, n_agents: usize, cutoff: i64) -> Matrix {
    let n = history.count_upto(cutoff);
    let mut m = Matrix::zeros(n_agents, 2);
    if n == 0 {
        return m;
    }
    for j in 0..n_agents {
        let sfe = history.sfe[..n].iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let crps = history.crps[..n].iter().map(|r| r[j]).sum::<f64>() / n as f64;
        m.set(j, 0, sfe);
        m.set(j, 1, crps);
    }
    m
}

/// Mean, variance, skewness, excess kurtosis of each agent's forecast for
/// `target`, plus the cross-agent sd of the means (same for every agent):
/// a `J × 5` block.
pub fn build_features(archive: &AgentForecastArchive, target: i64) -> Result<Matrix> {
    let row = archive
        .row(target)
        .ok_or_else(|| shape(format!("archive has no forecasts for target {target}")))?;
    let j = row.forecasts.len();
    let mut m = Matrix::zeros(j, 5);
    let mut means = Vec::with_capacity(j);
    for (a, f) in row.forecasts.iter().enumerate() {
        if f.draw_count().is_some_and(|n| n < 4) {
            return Err(shape(format!("agent {a} at target {target} has fewer than 4 draws")));
        }
        let mo = f.moments();
        m.set(a, 0, mo.mean);
        m.set(a, 1, mo.variance);
        m.set(a, 2, mo.skewness);
        m.set(a, 3, mo.excess_kurtosis);
        means.push(mo.mean);
    }
    let mu = means.iter().sum::<f64>() / j as f64;
    let disp = if j > 1 {
        (means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (j - 1) as f64).sqrt()
    } else {
        0.0
    };
    for a in 0..j {
        m.set(a, 4, disp);
    }
    Ok(m)
}

/// Exogenous columns lagged by `h` and a trend, for the given targets:
/// rows `t * J + j`, identical across `j`.
pub fn build_exogenous(indicators: &[(String, TimeSeriesF)], h: usize, targets: &[i64], n_agents: usize) -> Result<Matrix> {
    let k = indicators.len() + 1;
    let mut m = Matrix::zeros(targets.len() * n_agents, k);
    for (ti, t) in targets.iter().enumerate() {
        for (c, (name, s)) in indicators.iter().enumerate() {
            let v = s
                .at(t - h as i64)
                .ok_or_else(|| shape(format!("indicator {name} has no value at period {}", t - h as i64)))?;
            for j in 0..n_agents {
                m.set(ti * n_agents + j, c, v);
            }
        }
        for j in 0..n_agents {
            m.set(ti * n_agents + j, k - 1, *t as f64);
        }
    }
    Ok(m)
}

/// Scores of the forecast for `target − h`, when known at the cutoff.
fn lagged_scores(
    history: &AgentScoreHistory,
    targets: &[i64],
    h: usize,
    cutoff: i64,
    n_agents: usize,
) -> Matrix {
    let visible = history.count_upto(cutoff);
    let first = (visible > 0).then(|| (history.sfe[0].clone(), history.crps[0].clone()));
    let mut m = Matrix::zeros(targets.len() * n_agents, 2);
    for (ti, t) in targets.iter().enumerate() {
        let src = t - h as i64;
        let found = history.index(src).filter(|i| *i < visible && src <= cutoff);
        for j in 0..n_agents {
            let (s, c) = match (found, &first) {
                (Some(i), _) => (history.sfe[i][j], history.crps[i][j]),
                // cold start: the earliest visible score, or 0 with none yet
                (None, Some((fs, fc))) => (fs[j], fc[j]),
                (None, None) => (0.0, 0.0),
            };
            m.set(ti * n_agents + j, 0, s);
            m.set(ti * n_agents + j, 1, c);
        }
    }
    m
}

/// Inputs from which panels are assembled.
#[derive(Debug, Clone)]
pub struct ModifierIngredients<'a> {
    pub archive: &'a AgentForecastArchive,
    pub realized: &'a TimeSeriesF,
    pub exogenous: &'a [(String, TimeSeriesF)],
    pub scores: AgentScoreHistory,
}

impl<'a> ModifierIngredients<'a> {
    pub fn new(
        archive: &'a AgentForecastArchive,
        realized: &'a TimeSeriesF,
        exogenous: &'a [(String, TimeSeriesF)],
    ) -> Result<Self> {
        Ok(Self {
            archive,
            realized,
            exogenous,
            scores: AgentScoreHistory::compute(archive, realized)?,
        })
    }
}

/// Panel for `targets` as seen at `cutoff`.
pub fn assemble_panel(spec: ModifierSpec, ing: &ModifierIngredients, targets: &[i64], cutoff: i64) -> Result<ModifierPanel> {
    let j = ing.archive.n_agents();
    let h = ing.archive.horizon() as usize;
    if let Some(t) = targets.iter().find(|t| **t - h as i64 > cutoff) {
        return Err(shape(format!("target {t} is not forecastable at cutoff {cutoff} with horizon {h}")));
    }
    let n_rows = targets.len() * j;
    let mut z_gamma = Matrix::zeros(j, 0);
    let mut gamma_columns = vec![];
    let mut z_beta = Matrix::zeros(n_rows, 0);
    let mut beta_columns = vec![];

    let avg = |zg: &mut Matrix, cols: &mut Vec<ColumnInfo>| -> Result<()> {
        *zg = zg.hcat(&build_avg_scores(&ing.scores, j, cutoff))?;
        cols.push(ColumnInfo::new("avg_sfe", Provenance::Score));
        cols.push(ColumnInfo::new("avg_crps", Provenance::Score));
        Ok(())
    };
    let exo = |zb: &mut Matrix, cols: &mut Vec<ColumnInfo>| -> Result<()> {
        if ing.exogenous.is_empty() {
            return Err(BpsError::config("exogenous", "specification needs at least one exogenous indicator"));
        }
        *zb = zb.hcat(&build_exogenous(ing.exogenous, h, targets, j)?)?;
        for (name, _) in ing.exogenous {
            cols.push(ColumnInfo::new(format!("{name}_lag{h}"), Provenance::Exogenous));
        }
        cols.push(ColumnInfo::new("trend", Provenance::Trend));
        Ok(())
    };
    let features = |zb: &mut Matrix, cols: &mut Vec<ColumnInfo>| -> Result<()> {
        let mut f = Matrix::zeros(n_rows, 5);
        for (ti, t) in targets.iter().enumerate() {
            let block = build_features(ing.archive, *t)?;
            for a in 0..j {
                for k in 0..5 {
                    f.set(ti * j + a, k, block.get(a, k));
                }
            }
        }
        *zb = zb.hcat(&f)?;
        for l in ["mean", "variance", "skewness", "excess_kurtosis", "dispersion"] {
            cols.push(ColumnInfo::new(l, Provenance::Feature));
        }
        *zb = zb.hcat(&lagged_scores(&ing.scores, targets, h, cutoff, j))?;
        cols.push(ColumnInfo::new(format!("sfe_lag{h}"), Provenance::Score));
        cols.push(ColumnInfo::new(format!("crps_lag{h}"), Provenance::Score));
        Ok(())
    };

    match spec {
        ModifierSpec::AvgScores => avg(&mut z_gamma, &mut gamma_columns)?,
        ModifierSpec::ExoInd => exo(&mut z_beta, &mut beta_columns)?,
        ModifierSpec::Features => {
            avg(&mut z_gamma, &mut gamma_columns)?;
            features(&mut z_beta, &mut beta_columns)?;
        }
        ModifierSpec::All => {
            avg(&mut z_gamma, &mut gamma_columns)?;
            exo(&mut z_beta, &mut beta_columns)?;
            features(&mut z_beta, &mut beta_columns)?;
        }
        ModifierSpec::Toy => {
            let mut trend = Matrix::zeros(n_rows, 1);
            for (ti, t) in targets.iter().enumerate() {
                for a in 0..j {
                    trend.set(ti * j + a, 0, *t as f64);
                }
            }
            z_beta = trend.hcat(&lagged_scores(&ing.scores, targets, h, cutoff, j))?;
            beta_columns = vec![
                ColumnInfo::new("trend", Provenance::Trend),
                ColumnInfo::new(format!("sfe_lag{h}"), Provenance::Score),
                ColumnInfo::new(format!("crps_lag{h}"), Provenance::Score),
            ];
        }
    }
    Ok(ModifierPanel {
        n_agents: j,
        targets: targets.to_vec(),
        z_gamma,
        z_beta,
        gamma_columns,
        beta_columns,
    })
}
