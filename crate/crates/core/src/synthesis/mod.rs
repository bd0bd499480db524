//! The synthesis sampler: `y_t = c_t + Σ_j (γ_j + β_jt) x_jt + σ_t ν_t` with
//! constant (CONST), random-walk (RW) or tree-driven (RT) weights.
//!
//! Time runs over the target periods of the estimation window; arrays of
//! `T × J` values are stored period-major (`t * J + j`), matching the
//! modifier panels.

mod density;
mod diagnostics;
mod proposal;
mod sweep;

use serde::{Deserialize, Serialize};

pub use density::{silverman_bandwidth, AgentDensity, KernelDensity, KDE_GRID, KDE_MIN_BANDWIDTH};
pub use diagnostics::{incompleteness_r2, regime_crossing, shrinkage_r2, split_rhat, weight_quantiles, ShrinkageR2};
pub use proposal::{agent_draw_log_target, gibbs_gaussian_agent_draws, mh_update_agent_draws, AdaptiveProposal};
pub use sweep::{gibbs_sweep, rw_sweep_beta, SweepRngs};

use crate::error::{shape, BpsError, Result};
use crate::eval::quantile_sorted;
use crate::modifiers::{ModifierPanel, ModifierSpec};
use crate::rng::{RngHandle, Step};
use crate::shrinkage::HorseshoeState;
use crate::statespace::{GammaPrior, InterceptPath, SvPriors, SvState, SIGMA2_C_PRIOR};
use crate::tree::{count_splits_by_modifier, EnsembleTarget, TreeEnsemble, TreePriorConfig};
use crate::types::{AgentForecast, AgentForecastArchive, Matrix, McmcConfig, TimeSeriesF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthesisKind {
    Const,
    Rw,
    Rt,
}

impl std::str::FromStr for SynthesisKind {
    type Err = BpsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "const" | "bps-const" => Ok(Self::Const),
            "rw" | "bps-rw" => Ok(Self::Rw),
            "rt" | "bps-rt" => Ok(Self::Rt),
            other => Err(BpsError::config("kind", format!("unknown synthesis kind {other:?}"))),
        }
    }
}

/// How agent forecasts enter the agent-draw update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentDensityMode {
    /// Kernel density over the draws (exact density for histograms), MH update.
    Kernel,
    /// Gaussian summaries where available, updated by an exact Gibbs draw.
    Analytic,
}

/// Blocks held at their initial values, for diagnostics and oracle tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedBlocks {
    pub intercept: bool,
    pub volatility: bool,
    pub agent_draws: bool,
    pub gamma: bool,
    pub beta: bool,
    pub trees: bool,
    pub horseshoe: bool,
    pub rw_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    pub kind: SynthesisKind,
    /// Trees per ensemble (RT).
    pub n_trees: usize,
    /// Stochastic volatility; a constant variance otherwise.
    pub sv: bool,
    pub modifier_spec: Option<ModifierSpec>,
    pub mcmc: McmcConfig,
    pub tree_prior: TreePriorConfig,
    /// Weight of the fixed-scale proposal component.
    pub kappa: f64,
    pub agent_density: AgentDensityMode,
    /// Sets `γ ≡ 0`, leaving the weights to `β` alone.
    pub fix_gamma_zero: bool,
    /// Replaces the horseshoe scales by a constant.
    pub pinned_tau_gamma: Option<f64>,
    pub pinned_tau_beta: Option<f64>,
    pub sigma2_c_prior: GammaPrior,
    /// Prior of each diagonal element of the RW innovation covariance.
    pub rw_v_prior: GammaPrior,
    pub sv_priors: SvPriors,
    pub fixed: FixedBlocks,
}

impl SynthesisSpec {
    pub fn new(kind: SynthesisKind) -> Self {
        Self {
            kind,
            n_trees: 1,
            sv: true,
            modifier_spec: None,
            mcmc: McmcConfig::default(),
            tree_prior: TreePriorConfig::default(),
            kappa: 0.05,
            agent_density: AgentDensityMode::Kernel,
            fix_gamma_zero: false,
            pinned_tau_gamma: None,
            pinned_tau_beta: None,
            sigma2_c_prior: SIGMA2_C_PRIOR,
            rw_v_prior: SIGMA2_C_PRIOR,
            sv_priors: SvPriors::default(),
            fixed: FixedBlocks::default(),
        }
    }

    /// The threshold example: one tree, `γ ≡ 0`, small pinned `τ^β`,
    /// Gaussian agents handled analytically.
    pub fn toy_rt(mcmc: McmcConfig) -> Self {
        Self {
            n_trees: 1,
            modifier_spec: Some(ModifierSpec::Toy),
            mcmc,
            agent_density: AgentDensityMode::Analytic,
            fix_gamma_zero: true,
            pinned_tau_beta: Some(TOY_TAU_BETA),
            ..Self::new(SynthesisKind::Rt)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mcmc.validate()?;
        self.tree_prior.validate()?;
        if self.kind == SynthesisKind::Rt && self.n_trees == 0 {
            return Err(BpsError::config("n_trees", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(BpsError::config("kappa", "must lie in [0, 1]"));
        }
        if let Some(t) = self.pinned_tau_gamma {
            if !(t > 0.0 && t.is_finite()) {
                return Err(BpsError::config("pinned_tau_gamma", "must be positive and finite"));
            }
        }
        if let Some(t) = self.pinned_tau_beta {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(BpsError::config("pinned_tau_beta", "must be nonnegative and finite"));
            }
        }
        Ok(())
    }

    fn has_gamma(&self) -> bool {
        !self.fix_gamma_zero
    }
}

/// Pinned `τ^β` of the threshold example.
pub const TOY_TAU_BETA: f64 = 1e-4;

/// Estimation data: realized targets, agent forecasts and modifiers, plus
/// optionally the forecasts and modifier rows of the next target.
#[derive(Debug, Clone)]
pub struct SynthesisData {
    pub targets: Vec<i64>,
    pub y: Vec<f64>,
    pub forecasts: Vec<Vec<AgentForecast>>,
    pub z_gamma: Matrix,
    pub z_beta: Matrix,
    pub next_target: Option<i64>,
    pub next_forecasts: Option<Vec<AgentForecast>>,
    pub z_beta_next: Option<Matrix>,
    n_agents: usize,
}

impl SynthesisData {
    pub fn new(targets: Vec<i64>, y: Vec<f64>, forecasts: Vec<Vec<AgentForecast>>) -> Result<Self> {
        let t = y.len();
        if t < 2 {
            return Err(shape("synthesis needs at least two target periods"));
        }
        if targets.len() != t || forecasts.len() != t {
            return Err(shape("targets, realizations and forecasts differ in length"));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(shape(format!("realization {i} is not finite")));
        }
        let j = forecasts[0].len();
        if j == 0 || forecasts.iter().any(|r| r.len() != j) {
            return Err(shape("every period needs the same positive number of agents"));
        }
        Ok(Self {
            targets,
            y,
            forecasts,
            z_gamma: Matrix::zeros(j, 0),
            z_beta: Matrix::zeros(t * j, 0),
            next_target: None,
            next_forecasts: None,
            z_beta_next: None,
            n_agents: j,
        })
    }

    /// Targets `from..=to` of `archive` with realizations from `realized`;
    /// the archive row `to + h`, if present, becomes the prediction target.
    pub fn from_archive(archive: &AgentForecastArchive, realized: &TimeSeriesF, from: i64, to: i64) -> Result<Self> {
        let rows = archive.range(from, to)?;
        let mut targets = vec![];
        let mut y = vec![];
        let mut forecasts = vec![];
        for r in rows {
            let v = realized
                .at(r.target_period)
                .ok_or_else(|| shape(format!("no realization for target {}", r.target_period)))?;
            targets.push(r.target_period);
            y.push(v);
            forecasts.push(r.forecasts.clone());
        }
        let mut d = Self::new(targets, y, forecasts)?;
        let next = to + archive.horizon() as i64;
        if let Some(r) = archive.row(next) {
            d.next_target = Some(next);
            d.next_forecasts = Some(r.forecasts.clone());
        }
        Ok(d)
    }

    /// Attaches a panel whose targets are the estimation targets, optionally
    /// followed by the prediction target.
    pub fn with_panel(mut self, panel: &ModifierPanel) -> Result<Self> {
        let t = self.t_len();
        let j = self.n_agents;
        if panel.n_agents != j {
            return Err(shape("panel and forecasts disagree on the number of agents"));
        }
        if panel.targets.len() < t || panel.targets[..t] != self.targets[..] {
            return Err(shape("panel targets do not cover the estimation window"));
        }
        self.z_gamma = panel.z_gamma.clone();
        self.z_beta = panel.beta_block(0, t);
        match panel.targets.len() - t {
            0 => {}
            1 => {
                if self.next_target.is_some_and(|n| n != panel.targets[t]) {
                    return Err(shape("panel prediction row belongs to a different target"));
                }
                self.next_target = Some(panel.targets[t]);
                self.z_beta_next = Some(panel.beta_block(t, t + 1));
            }
            _ => return Err(shape("panel may extend the window by at most one target")),
        }
        Ok(self)
    }

    pub fn t_len(&self) -> usize {
        self.y.len()
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn densities(&self, mode: AgentDensityMode) -> Vec<AgentDensity> {
        let analytic = mode == AgentDensityMode::Analytic;
        self.forecasts
            .iter()
            .flat_map(|r| r.iter().map(move |f| AgentDensity::from_forecast(f, analytic)))
            .collect()
    }
}

/// Full latent state of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisState {
    pub gamma: Vec<f64>,
    /// `T × J`, zero for CONST.
    pub beta: Vec<f64>,
    pub intercept: InterceptPath,
    pub sv: SvState,
    /// Latent agent draws, `T × J`.
    pub x: Vec<f64>,
    pub trees_gamma: Option<TreeEnsemble>,
    pub trees_beta: Option<TreeEnsemble>,
    /// Prior means of `γ` (length J) and `β` (`T × J`).
    pub mu_gamma: Vec<f64>,
    pub mu_beta: Vec<f64>,
    pub hs_gamma: Option<HorseshoeState>,
    pub hs_beta: Option<HorseshoeState>,
    /// RW innovation variances.
    pub v_diag: Option<Vec<f64>>,
    pub proposals: Vec<AdaptiveProposal>,
}

impl SynthesisState {
    /// Deterministic start: agent draws at the forecast means, equal
    /// weights `1/J`, zero intercept, the sample variance of `y`.
    pub fn initial(spec: &SynthesisSpec, data: &SynthesisData) -> Self {
        let t = data.t_len();
        let j = data.n_agents();
        let mut x = Vec::with_capacity(t * j);
        let mut var = Vec::with_capacity(t * j);
        for row in &data.forecasts {
            for f in row {
                let m = f.moments();
                x.push(m.mean);
                var.push(m.variance);
            }
        }
        let proposals = (0..t)
            .map(|p| AdaptiveProposal::new(spec.kappa, &var[p * j..(p + 1) * j]))
            .collect();
        let ym = data.y.iter().sum::<f64>() / t as f64;
        let yv = (data.y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / (t - 1) as f64).max(1e-6);
        let has_gamma = spec.has_gamma();
        let rt = spec.kind == SynthesisKind::Rt;
        let (gamma, beta) = if has_gamma {
            (vec![1.0 / j as f64; j], vec![0.0; t * j])
        } else {
            (vec![0.0; j], vec![if rt { 1.0 / j as f64 } else { 0.0 }; t * j])
        };
        Self {
            gamma,
            beta,
            intercept: InterceptPath::zeros(t),
            sv: SvState::new(t, yv, !spec.sv),
            x,
            // both prior-mean functions are sums of S trees under RT
            trees_gamma: has_gamma.then(|| {
                TreeEnsemble::root_only(if rt { spec.n_trees } else { 1 }, EnsembleTarget::Gamma, data.z_gamma.cols())
            }),
            trees_beta: rt.then(|| TreeEnsemble::root_only(spec.n_trees, EnsembleTarget::Beta, data.z_beta.cols())),
            mu_gamma: vec![0.0; j],
            mu_beta: vec![0.0; t * j],
            hs_gamma: (has_gamma && spec.pinned_tau_gamma.is_none()).then(|| HorseshoeState::new(j)),
            hs_beta: (rt && spec.pinned_tau_beta.is_none()).then(|| HorseshoeState::new(j)),
            v_diag: (spec.kind == SynthesisKind::Rw).then(|| vec![spec.rw_v_prior.shape / spec.rw_v_prior.rate; j]),
            proposals,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.gamma.len()
    }

    pub fn t_len(&self) -> usize {
        self.intercept.c.len()
    }

    pub fn tau_gamma(&self, spec: &SynthesisSpec) -> Vec<f64> {
        match (&self.hs_gamma, spec.pinned_tau_gamma) {
            (_, Some(t)) => vec![t; self.n_agents()],
            (Some(h), None) => h.taus(),
            (None, None) => vec![0.0; self.n_agents()],
        }
    }

    pub fn tau_beta(&self, spec: &SynthesisSpec) -> Vec<f64> {
        match (&self.hs_beta, spec.pinned_tau_beta) {
            (_, Some(t)) => vec![t; self.n_agents()],
            (Some(h), None) => h.taus(),
            (None, None) => vec![0.0; self.n_agents()],
        }
    }

    /// Combination weight `γ_j + β_jt`.
    pub fn weight(&self, t: usize, j: usize) -> f64 {
        self.gamma[j] + self.beta[t * self.n_agents() + j]
    }

    /// `y_t − c_t − Σ_j w_jt x_jt`.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        let j = self.n_agents();
        (0..y.len())
            .map(|t| {
                let fit: f64 = (0..j).map(|a| self.weight(t, a) * self.x[t * j + a]).sum();
                y[t] - self.intercept.c[t] - fit
            })
            .collect()
    }
}

/// One retained state, with what prediction and reporting need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisDraw {
    pub chain: u32,
    pub iteration: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma2_c: f64,
    pub log_vol: Vec<f64>,
    pub sv_mu: f64,
    pub sv_rho: f64,
    pub sv_sigma2: f64,
    pub x: Vec<f64>,
    pub mu_gamma: Vec<f64>,
    pub mu_beta: Vec<f64>,
    pub tau_gamma: Vec<f64>,
    pub tau_beta: Vec<f64>,
    pub v_diag: Vec<f64>,
    /// Prior mean of `β` at the prediction target (RT with a prediction row).
    pub mu_beta_next: Vec<f64>,
    pub split_counts_gamma: Vec<usize>,
    pub split_counts_beta: Vec<usize>,
}

impl SynthesisDraw {
    fn capture(chain: u32, iteration: usize, s: &SynthesisState, spec: &SynthesisSpec, data: &SynthesisData) -> Self {
        let mu_beta_next = match (&s.trees_beta, &data.z_beta_next) {
            (Some(e), Some(z)) => e.evaluate_rows(z),
            _ => vec![],
        };
        Self {
            chain,
            iteration,
            gamma: s.gamma.clone(),
            beta: s.beta.clone(),
            c: s.intercept.c.clone(),
            sigma2_c: s.intercept.sigma2_c,
            log_vol: s.sv.log_vol.clone(),
            sv_mu: s.sv.mu,
            sv_rho: s.sv.rho,
            sv_sigma2: s.sv.sigma2,
            x: s.x.clone(),
            mu_gamma: s.mu_gamma.clone(),
            mu_beta: s.mu_beta.clone(),
            tau_gamma: s.tau_gamma(spec),
            tau_beta: s.tau_beta(spec),
            v_diag: s.v_diag.clone().unwrap_or_default(),
            mu_beta_next,
            split_counts_gamma: s
                .trees_gamma
                .as_ref()
                .map(|e| count_splits_by_modifier(e, data.z_gamma.cols()))
                .unwrap_or_default(),
            split_counts_beta: s
                .trees_beta
                .as_ref()
                .map(|e| count_splits_by_modifier(e, data.z_beta.cols()))
                .unwrap_or_default(),
        }
    }

    pub fn weight(&self, t: usize, j: usize) -> f64 {
        self.gamma[j] + self.beta[t * self.gamma.len() + j]
    }
}

/// Retained states of one or more chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawArchive {
    pub spec: SynthesisSpec,
    pub seed: u64,
    pub targets: Vec<i64>,
    pub y: Vec<f64>,
    pub n_agents: usize,
    pub next_target: Option<i64>,
    pub draws: Vec<SynthesisDraw>,
    /// Long-run agent-draw acceptance per chain, when MH was used.
    pub acceptance: Vec<Option<f64>>,
    /// The final tree ensembles of the first chain.
    pub final_trees_gamma: Option<TreeEnsemble>,
    pub final_trees_beta: Option<TreeEnsemble>,
}

impl DrawArchive {
    pub fn chain_draws(&self, chain: u32) -> impl Iterator<Item = &SynthesisDraw> {
        self.draws.iter().filter(move |d| d.chain == chain)
    }

    pub fn n_chains(&self) -> usize {
        self.acceptance.len()
    }

    /// Posterior draws of the weight `γ_j + β_jt`.
    pub fn weight_draws(&self, t: usize, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.weight(t, j)).collect()
    }
}

/// Progress events emitted while a chain runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProgressEvent {
    ChainStarted { chain: u32 },
    Sweep { chain: u32, iteration: usize, acceptance: Option<f64> },
    ChainFinished { chain: u32, retained: usize },
}

pub type ProgressSink<'a> = &'a (dyn Fn(ProgressEvent) + Sync);

const PROGRESS_EVERY: usize = 500;

/// Runs one chain from `init` (or the default start).
pub fn run_single_chain(
    spec: &SynthesisSpec,
    data: &SynthesisData,
    seed: u64,
    chain: u32,
    init: Option<SynthesisState>,
    progress: Option<ProgressSink>,
) -> Result<(Vec<SynthesisDraw>, SynthesisState)> {
    spec.validate()?;
    validate_against(spec, data)?;
    let densities = data.densities(spec.agent_density);
    let mut state = init.unwrap_or_else(|| SynthesisState::initial(spec, data));
    if state.t_len() != data.t_len() || state.n_agents() != data.n_agents() {
        return Err(shape("initial state does not match the data dimensions"));
    }
    let mut rngs = SweepRngs::new(seed, chain);
    let mut out = Vec::with_capacity(spec.mcmc.retained_per_chain());
    if let Some(p) = progress {
        p(ProgressEvent::ChainStarted { chain });
    }
    for iter in 0..spec.mcmc.n_total {
        if iter == spec.mcmc.n_burn {
            for p in &mut state.proposals {
                p.frozen = true;
            }
        }
        gibbs_sweep(&mut state, data, &densities, spec, &mut rngs).map_err(|e| e.at_iteration(iter))?;
        if spec.mcmc.keeps(iter) {
            out.push(SynthesisDraw::capture(chain, iter, &state, spec, data));
        }
        if let Some(p) = progress {
            if (iter + 1) % PROGRESS_EVERY == 0 {
                p(ProgressEvent::Sweep { chain, iteration: iter + 1, acceptance: acceptance_rate(&state) });
            }
        }
    }
    if let Some(p) = progress {
        p(ProgressEvent::ChainFinished { chain, retained: out.len() });
    }
    Ok((out, state))
}

fn acceptance_rate(state: &SynthesisState) -> Option<f64> {
    let (a, n) = state
        .proposals
        .iter()
        .fold((0, 0), |(a, n), p| (a + p.accepted, n + p.proposed));
    (n > 0).then(|| a as f64 / n as f64)
}

fn validate_against(spec: &SynthesisSpec, data: &SynthesisData) -> Result<()> {
    if spec.kind == SynthesisKind::Const && data.z_beta.cols() > 0 {
        return Err(BpsError::config("modifier_spec", "CONST weights take no time-varying modifiers"));
    }
    Ok(())
}

/// All chains, run concurrently on scoped threads and merged in chain order.
pub fn run_chain(spec: &SynthesisSpec, data: &SynthesisData, seed: u64, progress: Option<ProgressSink>) -> Result<DrawArchive> {
    spec.validate()?;
    let n_chains = spec.mcmc.n_chains;
    let results: Vec<Result<(Vec<SynthesisDraw>, SynthesisState)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n_chains as u32)
            .map(|c| s.spawn(move || run_single_chain(spec, data, seed, c, None, progress)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(BpsError::InvalidArgument("chain thread panicked".into()))))
            .collect()
    });
    let mut draws = vec![];
    let mut acceptance = vec![];
    let mut finals = None;
    for r in results {
        let (d, st) = r?;
        draws.extend(d);
        acceptance.push(acceptance_rate(&st));
        if finals.is_none() {
            finals = Some((st.trees_gamma, st.trees_beta));
        }
    }
    let (final_trees_gamma, final_trees_beta) = finals.unwrap_or((None, None));
    Ok(DrawArchive {
        spec: spec.clone(),
        seed,
        targets: data.targets.clone(),
        y: data.y.clone(),
        n_agents: data.n_agents(),
        next_target: data.next_target,
        draws,
        acceptance,
        final_trees_gamma,
        final_trees_beta,
    })
}

/// Quantile levels stored with every predictive draw set.
pub fn quantile_levels() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Posterior-predictive draws of the target at one origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDrawSet {
    pub target_period: i64,
    pub draws: Vec<f64>,
    pub mean: f64,
    /// `(level, quantile)` on the percentile grid.
    pub quantiles: Vec<(f64, f64)>,
}

impl PredictiveDrawSet {
    pub fn from_draws(target_period: i64, draws: Vec<f64>) -> Self {
        let mean = draws.iter().sum::<f64>() / draws.len().max(1) as f64;
        let mut s = draws.clone();
        s.sort_by(f64::total_cmp);
        let quantiles = if s.is_empty() {
            vec![]
        } else {
            quantile_levels().into_iter().map(|a| (a, quantile_sorted(&s, a))).collect()
        };
        Self {
            target_period,
            draws,
            mean,
            quantiles,
        }
    }
}

/// Projects every retained state `h` periods past the window and draws the
/// target: intercept and log-volatility by their laws of motion, `β` by its
/// prior around the trees (RT), a random-walk step (RW) or zero (CONST),
/// agent draws unconditionally from the new forecasts.
pub fn predict(archive: &DrawArchive, new_forecasts: &[AgentForecast], horizon: usize, seed: u64) -> Result<PredictiveDrawSet> {
    let j = archive.n_agents;
    if new_forecasts.len() != j {
        return Err(shape(format!("{} forecasts for {j} agents", new_forecasts.len())));
    }
    let target = archive
        .next_target
        .ok_or_else(|| shape("archive has no prediction target"))?;
    let spec = &archive.spec;
    let t_len = archive.targets.len();
    let steps = horizon.max(1) as f64;
    let mut rng = RngHandle::for_step(seed, 0, Step::Predict);
    let mut out = Vec::with_capacity(archive.draws.len());
    for d in &archive.draws {
        let c = d.c[t_len - 1] + (steps * d.sigma2_c).sqrt() * crate::dist::std_normal(&mut rng);
        let sv = SvState {
            log_vol: vec![d.log_vol[t_len - 1]],
            mu: d.sv_mu,
            rho: d.sv_rho,
            sigma2: d.sv_sigma2,
            homoskedastic: !spec.sv,
        };
        let sigma = (0.5 * sv.project(horizon.max(1), &mut rng)).exp();
        let mut y = c + sigma * crate::dist::std_normal(&mut rng);
        for a in 0..j {
            let beta = match spec.kind {
                SynthesisKind::Const => 0.0,
                SynthesisKind::Rw => {
                    d.beta[(t_len - 1) * j + a] + (steps * d.v_diag[a]).sqrt() * crate::dist::std_normal(&mut rng)
                }
                SynthesisKind::Rt => {
                    let mu = *d
                        .mu_beta_next
                        .get(a)
                        .ok_or_else(|| shape("retained draws lack modifier rows for the prediction target"))?;
                    mu + d.tau_beta[a].sqrt() * crate::dist::std_normal(&mut rng)
                }
            };
            let x = new_forecasts[a].sample(&mut rng);
            y += (d.gamma[a] + beta) * x;
        }
        out.push(y);
    }
    Ok(PredictiveDrawSet::from_draws(target, out))
}

/// Fits on `from..=origin` and predicts `origin + h`, building the panel
/// at the origin's information cutoff.
pub fn forecast_origin(
    spec: &SynthesisSpec,
    archive: &AgentForecastArchive,
    realized: &TimeSeriesF,
    ingredients: Option<&crate::modifiers::ModifierIngredients>,
    from: i64,
    origin: i64,
    seed: u64,
) -> Result<(DrawArchive, PredictiveDrawSet)> {
    let h = archive.horizon() as i64;
    let mut data = SynthesisData::from_archive(archive, realized, from, origin)?;
    let next = origin + h;
    let next_forecasts = data
        .next_forecasts
        .clone()
        .ok_or_else(|| shape(format!("archive has no forecasts for target {next}")))?;
    if spec.kind == SynthesisKind::Rt {
        if let Some(ms) = spec.modifier_spec {
            let ing = ingredients.ok_or_else(|| shape("modifier specification given without modifier inputs"))?;
            let mut targets = data.targets.clone();
            targets.push(next);
            let panel = crate::modifiers::assemble_panel(ms, ing, &targets, origin)?;
            data = data.with_panel(&panel)?;
        }
    }
    if spec.kind == SynthesisKind::Rt && data.z_beta_next.is_none() {
        // no modifiers: the prediction row is empty like the others
        data.z_beta_next = Some(Matrix::zeros(data.n_agents(), 0));
    }
    let arch = run_chain(spec, &data, seed, None)?;
    let pred = predict(&arch, &next_forecasts, h as usize, seed)?;
    Ok((arch, pred))
}

/// Estimation sample used at each origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EstimationWindow {
    /// All targets from `first` up to the origin.
    Expanding { first: i64 },
    /// The last `length` targets up to the origin.
    Rolling { length: usize },
}

impl EstimationWindow {
    pub fn start(&self, origin: i64) -> i64 {
        match *self {
            EstimationWindow::Expanding { first } => first,
            EstimationWindow::Rolling { length } => origin - length as i64 + 1,
        }
    }
}

/// Seed of one origin's chains, so origins can run in any order.
pub fn origin_seed(seed: u64, origin: i64) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(origin.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Output of one forecast origin.
#[derive(Debug, Clone)]
pub struct OriginOutput {
    pub origin: i64,
    /// First and last estimation targets.
    pub window: (i64, i64),
    pub archive: DrawArchive,
    pub predictive: PredictiveDrawSet,
}

/// Fits the window ending at `origin` and predicts `origin + h`, with a
/// seed derived from `seed` and the origin.
pub fn run_origin(
    spec: &SynthesisSpec,
    archive: &AgentForecastArchive,
    realized: &TimeSeriesF,
    ingredients: Option<&crate::modifiers::ModifierIngredients>,
    window: EstimationWindow,
    origin: i64,
    seed: u64,
) -> Result<OriginOutput> {
    let available = archive
        .first_target()
        .ok_or_else(|| shape("agent archive is empty"))?
        .max(realized.start_index());
    let from = match window {
        EstimationWindow::Expanding { first } => first.max(available),
        EstimationWindow::Rolling { .. } => window.start(origin),
    };
    if from < available {
        return Err(shape(format!(
            "rolling window for origin {origin} starts at {from}, before the first available target {available}"
        )));
    }
    if origin - from + 1 < 2 {
        return Err(shape(format!("window {from}..={origin} holds fewer than 2 targets")));
    }
    let (arch, pred) = forecast_origin(spec, archive, realized, ingredients, from, origin, origin_seed(seed, origin))?;
    Ok(OriginOutput {
        origin,
        window: (from, origin),
        archive: arch,
        predictive: pred,
    })
}
