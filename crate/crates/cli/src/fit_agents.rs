//! `fit-agents`: one ADL agent per indicator, refitted at every origin.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bpsrt_core::agents::{adl_archive_row, AdlModelSpec};
use bpsrt_core::io::{hash_json, parse_period, read_indicators, read_series, write_agent_archive, OutputStamp};
use bpsrt_core::{AgentForecastArchive, BpsError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::common::{input_digest, load_overrides, pool};

#[derive(clap::Args)]
pub struct Args {
    /// Target series (`period,value`).
    #[arg(long)]
    pub realized: PathBuf,
    /// Indicators (`period,<name>,...`); one agent per column.
    #[arg(long)]
    pub indicators: PathBuf,
    /// Output archive directory.
    #[arg(long)]
    pub out: PathBuf,
    /// First forecast origin (period label).
    #[arg(long)]
    pub first_origin: String,
    /// Last forecast origin (period label).
    #[arg(long)]
    pub last_origin: String,
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
    /// Rolling estimation window in periods.
    #[arg(long, default_value_t = 80)]
    pub window: usize,
    /// Stochastic volatility in the agents' errors.
    #[arg(long)]
    pub sv: bool,
    #[arg(long, default_value_t = 3000)]
    pub n_iter: usize,
    #[arg(long, default_value_t = 500)]
    pub n_burn: usize,
    /// Predictive draws stored per agent and origin.
    #[arg(long, default_value_t = 1000)]
    pub n_draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Origins fitted in parallel; all cores when absent.
    #[arg(long)]
    pub workers: Option<usize>,
    /// TOML file whose keys override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overrides {
    first_origin: Option<String>,
    last_origin: Option<String>,
    horizon: Option<usize>,
    window: Option<usize>,
    sv: Option<bool>,
    n_iter: Option<usize>,
    n_burn: Option<usize>,
    n_draws: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
}

#[derive(Serialize)]
struct Settings<'a> {
    first_origin: &'a str,
    last_origin: &'a str,
    horizon: usize,
    window: usize,
    sv: bool,
    n_iter: usize,
    n_burn: usize,
    n_draws: usize,
    seed: u64,
}

pub fn run(args: Args) -> Result<()> {
    let o: Overrides = match &args.config {
        Some(p) => load_overrides(p)?,
        None => Overrides::default(),
    };
    let first_label = o.first_origin.unwrap_or(args.first_origin);
    let last_label = o.last_origin.unwrap_or(args.last_origin);
    let settings = Settings {
        first_origin: &first_label,
        last_origin: &last_label,
        horizon: o.horizon.unwrap_or(args.horizon),
        window: o.window.unwrap_or(args.window),
        sv: o.sv.unwrap_or(args.sv),
        n_iter: o.n_iter.unwrap_or(args.n_iter),
        n_burn: o.n_burn.unwrap_or(args.n_burn),
        n_draws: o.n_draws.unwrap_or(args.n_draws),
        seed: o.seed.unwrap_or(args.seed),
    };
    let workers = o.workers.or(args.workers);

    let target = read_series(&args.realized)?;
    let indicators = read_indicators(&args.indicators)?;
    let freq = target.frequency_label().to_string();
    let first = parse_period(&first_label, &freq).map_err(|e| BpsError::config("first_origin", e.to_string()))?;
    let last = parse_period(&last_label, &freq).map_err(|e| BpsError::config("last_origin", e.to_string()))?;
    if first > last {
        return Err(BpsError::config("last_origin", "precedes first_origin"));
    }
    let base = AdlModelSpec {
        window: settings.window,
        n_iter: settings.n_iter,
        n_burn: settings.n_burn,
        n_draws: settings.n_draws,
        ..AdlModelSpec::new(0, settings.sv, settings.horizon)
    };
    base.validate().map_err(|e| BpsError::config("agent settings", e.to_string()))?;

    let origins: Vec<i64> = (first..=last).collect();
    let rows = pool(workers)?.install(|| {
        origins
            .par_iter()
            .map(|&origin| adl_archive_row(&base, &target, &indicators, origin, settings.seed))
            .collect::<Result<Vec<_>>>()
    })?;
    let labels = indicators.iter().map(|(n, _)| n.clone()).collect();
    let archive = AgentForecastArchive::new(settings.horizon as u32, labels, rows)?;
    let stamp = OutputStamp {
        config_hash: hash_json(&settings)?,
        input_digest: input_digest(&[&args.realized, &args.indicators])?,
    };
    write_agent_archive(&archive, &args.out, &freq, &BTreeMap::new(), Some(&stamp))?;
    eprintln!(
        "wrote {} origins x {} agents to {}",
        origins.len(),
        archive.n_agents(),
        args.out.display()
    );
    Ok(())
}
