//! `simulate-toy`: data of the two-regime threshold example.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bpsrt_core::agents::{simulate_toy, ToyDgpConfig};
use bpsrt_core::io::{
    digest_bytes, hash_json, write_agent_archive, write_panel, write_series, DataPaths, EvaluationConfig, ExperimentConfig,
    OutputStamp, SynthesisConfig, WindowMode, FORMAT_VERSION,
};
use bpsrt_core::modifiers::{assemble_panel, ModifierIngredients, ModifierSpec};
use bpsrt_core::synthesis::{AgentDensityMode, SynthesisKind};
use bpsrt_core::{McmcConfig, Result};
use serde::{Deserialize, Serialize};

use crate::common::{load_overrides, write_json};

#[derive(clap::Args)]
pub struct Args {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of simulated periods after the two starting values.
    #[arg(long, default_value_t = ToyDgpConfig::default().t_len)]
    pub t_len: usize,
    /// Last period of the first regime.
    #[arg(long, default_value_t = ToyDgpConfig::default().break_t)]
    pub break_t: usize,
    /// Draws stored per agent forecast.
    #[arg(long, default_value_t = ToyDgpConfig::default().draws_per_forecast)]
    pub draws_per_forecast: usize,
    /// TOML file whose keys override the flags (seed, t_len, break_t,
    /// draws_per_forecast, rho1, rho2, sigma0, c, y0, y1).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overrides {
    seed: Option<u64>,
    t_len: Option<usize>,
    break_t: Option<usize>,
    draws_per_forecast: Option<usize>,
    rho1: Option<f64>,
    rho2: Option<f64>,
    sigma0: Option<f64>,
    c: Option<f64>,
    y0: Option<f64>,
    y1: Option<f64>,
}

#[derive(Serialize)]
struct DgpRecord<'a> {
    format_version: u32,
    seed: u64,
    config_hash: &'a str,
    dgp: &'a ToyDgpConfig,
}

fn resolve(args: &Args) -> Result<(ToyDgpConfig, u64)> {
    let o: Overrides = match &args.config {
        Some(p) => load_overrides(p)?,
        None => Overrides::default(),
    };
    let d = ToyDgpConfig::default();
    let cfg = ToyDgpConfig {
        rho1: o.rho1.unwrap_or(d.rho1),
        rho2: o.rho2.unwrap_or(d.rho2),
        sigma0: o.sigma0.unwrap_or(d.sigma0),
        c: o.c.unwrap_or(d.c),
        t_len: o.t_len.unwrap_or(args.t_len),
        break_t: o.break_t.unwrap_or(args.break_t),
        y0: o.y0.unwrap_or(d.y0),
        y1: o.y1.unwrap_or(d.y1),
        draws_per_forecast: o.draws_per_forecast.unwrap_or(args.draws_per_forecast),
    };
    Ok((cfg, o.seed.unwrap_or(args.seed)))
}

/// Sample experiment around the break: up to 60 origins, expanding window
/// from the first forecastable target, desk-scale MCMC.
fn sample_experiment(cfg: &ToyDgpConfig, seed: u64, kind: SynthesisKind) -> ExperimentConfig {
    let last = (cfg.break_t + 29).min(cfg.t_len - 1) as i64;
    let first = (last - 59).max(3).min(last);
    let synthesis = match kind {
        SynthesisKind::Rt => SynthesisConfig {
            kind,
            preset: Some("toy".into()),
            modifier_spec: None,
            n_trees: None,
            sv: None,
            agent_density: None,
            kappa: None,
            fix_gamma_zero: None,
            pinned_tau_gamma: None,
            pinned_tau_beta: None,
            mcmc: None,
        },
        _ => SynthesisConfig {
            kind,
            preset: None,
            modifier_spec: None,
            n_trees: None,
            sv: None,
            agent_density: Some(AgentDensityMode::Analytic),
            kappa: None,
            fix_gamma_zero: None,
            pinned_tau_gamma: None,
            pinned_tau_beta: None,
            mcmc: None,
        },
    };
    let name = match kind {
        SynthesisKind::Rt => "run_rt",
        SynthesisKind::Rw => "run_rw",
        SynthesisKind::Const => "run_const",
    };
    ExperimentConfig {
        format_version: FORMAT_VERSION,
        seed,
        output_dir: name.into(),
        workers: None,
        data: DataPaths {
            agent_archive: "agents".into(),
            realized: "y.csv".into(),
            exogenous: None,
        },
        synthesis: SynthesisConfig {
            mcmc: Some(McmcConfig {
                n_total: 2000,
                n_burn: 500,
                thin: 1,
                n_chains: 1,
            }),
            ..synthesis
        },
        evaluation: EvaluationConfig {
            first_origin: first.to_string(),
            last_origin: last.to_string(),
            window: WindowMode::Expanding,
            first_target: Some("2".into()),
            window_length: None,
        },
    }
}

pub fn run(args: Args) -> Result<()> {
    let (cfg, seed) = resolve(&args)?;
    let (y, archive) = simulate_toy(&cfg, seed)?;
    let config_hash = hash_json(&(&cfg, seed))?;
    let stamp = OutputStamp {
        config_hash: config_hash.clone(),
        input_digest: digest_bytes(b""),
    };
    let out = &args.out;
    std::fs::create_dir_all(out)?;
    write_series(&out.join("y.csv"), &y, Some(&stamp))?;
    write_agent_archive(&archive, &out.join("agents"), "", &BTreeMap::new(), Some(&stamp))?;

    let ing = ModifierIngredients::new(&archive, &y, &[])?;
    let targets: Vec<i64> = archive.rows().iter().map(|r| r.target_period).collect();
    let cutoff = *targets.last().expect("toy archive is never empty");
    let panel = assemble_panel(ModifierSpec::Toy, &ing, &targets, cutoff)?;
    let modifiers = out.join("modifiers");
    std::fs::create_dir_all(&modifiers)?;
    write_panel(&modifiers, &panel, archive.agent_labels(), "", Some(&stamp))?;

    write_json(
        &out.join("dgp.json"),
        &DgpRecord {
            format_version: FORMAT_VERSION,
            seed,
            config_hash: &config_hash,
            dgp: &cfg,
        },
    )?;
    if cfg.t_len >= 4 {
        for (kind, file) in [(SynthesisKind::Rt, "experiment_rt.toml"), (SynthesisKind::Rw, "experiment_rw.toml")] {
            write_toml(&out.join(file), &sample_experiment(&cfg, seed, kind))?;
        }
    }
    eprintln!("wrote toy data with {} targets to {}", targets.len(), out.display());
    Ok(())
}

fn write_toml(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::write(path, cfg.to_toml()?)?;
    Ok(())
}
