//! `predict`: predictive draws from a stored draw archive.

use std::path::PathBuf;

use bpsrt_core::io::{hash_json, read_agent_archive, read_draw_archive, spec_hash, write_table, OutputStamp};
use bpsrt_core::synthesis::predict;
use bpsrt_core::{BpsError, Result};

use crate::common::input_digest;
use crate::run::predictive_table;

#[derive(clap::Args)]
pub struct Args {
    /// Draw archive (`.jsonl`) written by `run`.
    #[arg(long)]
    pub draws: PathBuf,
    /// Agent archive holding the forecasts of the archive's prediction target.
    #[arg(long)]
    pub agents: PathBuf,
    /// Output CSV (`draw_index,value`).
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the predictive simulation; the archive's own seed when
    /// absent, which reproduces the draws written by `run`.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: Args) -> Result<()> {
    let archive = read_draw_archive(&args.draws, None)?;
    let agents = read_agent_archive(&args.agents)?;
    let target = archive
        .next_target
        .ok_or_else(|| BpsError::DataShape("draw archive has no prediction target".into()))?;
    let row = agents
        .row(target)
        .ok_or_else(|| BpsError::DataShape(format!("agent archive has no forecasts for target {target}")))?;
    if agents.n_agents() != archive.n_agents {
        return Err(BpsError::DataShape(format!(
            "agent archive has {} agents, draw archive {}",
            agents.n_agents(),
            archive.n_agents
        )));
    }
    let last = *archive.targets.last().ok_or_else(|| BpsError::DataShape("draw archive has no targets".into()))?;
    let horizon = (target - last) as usize;
    let seed = args.seed.unwrap_or(archive.seed);
    let pred = predict(&archive, &row.forecasts, horizon, seed)?;
    let hash = spec_hash(&archive.spec, &archive.targets, &archive.y, archive.n_agents)?;
    let stamp = OutputStamp {
        config_hash: hash_json(&(hash, seed))?,
        input_digest: input_digest(&[&args.draws, &args.agents])?,
    };
    write_table(&args.out, Some(&stamp), &predictive_table(&pred))?;
    eprintln!("wrote {} predictive draws to {}", pred.draws.len(), args.out.display());
    Ok(())
}
