//! `build-modifiers`: the real-time modifier panel of one origin.

use std::path::PathBuf;

use bpsrt_core::io::{parse_period, write_panel};
use bpsrt_core::modifiers::assemble_panel;
use bpsrt_core::{BpsError, Result};

use crate::run::Experiment;

#[derive(clap::Args)]
pub struct Args {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Origin (period label); the last evaluation origin when absent.
    #[arg(long)]
    pub origin: Option<String>,
    /// Output directory; `<output_dir>/modifiers/origin_<label>` when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let exp = Experiment::load(&args.config)?;
    let ms = exp
        .spec
        .modifier_spec
        .ok_or_else(|| BpsError::config("synthesis.modifier_spec", "the experiment uses no modifiers"))?;
    let origin = match &args.origin {
        Some(s) => parse_period(s, exp.frequency).map_err(|e| BpsError::config("origin", e.to_string()))?,
        None => *exp.origins.last().expect("validated origin range is never empty"),
    };
    let available = exp
        .inputs
        .archive
        .first_target()
        .unwrap_or(origin)
        .max(exp.inputs.realized.start_index());
    let from = exp.window.start(origin).max(available);
    let mut targets: Vec<i64> = (from..=origin).collect();
    if exp.inputs.archive.row(origin + exp.horizon).is_some() {
        targets.push(origin + exp.horizon);
    }
    let ing = exp
        .ingredients()?
        .ok_or_else(|| BpsError::config("synthesis.kind", "modifier panels belong to tree models"))?;
    let panel = assemble_panel(ms, &ing, &targets, origin)?;
    let dir = args
        .out
        .unwrap_or_else(|| exp.output_dir().join("modifiers").join(format!("origin_{}", exp.label(origin))));
    std::fs::create_dir_all(&dir)?;
    write_panel(&dir, &panel, exp.inputs.archive.agent_labels(), exp.frequency, Some(&exp.stamp))?;
    eprintln!("wrote panel for {} targets to {}", targets.len(), dir.display());
    Ok(())
}
