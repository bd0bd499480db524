//! `bpsrt`: batch driver for density forecast synthesis experiments.

mod common;
mod evaluate;
mod fit_agents;
mod modifiers;
mod predict;
mod render_tree;
mod run;
mod simulate;

use std::process::ExitCode;

use bpsrt_core::BpsError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bpsrt", version, about = "Bayesian predictive synthesis with regression-tree weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the two-regime threshold example: target, agent archive and modifier panel.
    SimulateToy(simulate::Args),
    /// Fit one ADL agent per indicator at every origin and write the agent archive.
    FitAgents(fit_agents::Args),
    /// Assemble the real-time modifier panel of an experiment at one origin.
    BuildModifiers(modifiers::Args),
    /// Run the synthesis over all evaluation origins of an experiment.
    Run(run::Args),
    /// Predictive draws from a stored draw archive and new agent forecasts.
    Predict(predict::Args),
    /// Score runs against a benchmark and write the evaluation tables.
    Evaluate(evaluate::Args),
    /// Draw a tree of a stored draw archive as SVG.
    RenderTree(render_tree::Args),
}

/// 2 for configuration errors, 3 for data errors, 4 for numerical aborts.
pub fn exit_code(e: &BpsError) -> u8 {
    match e {
        BpsError::Config { .. } => 2,
        BpsError::Numerical { .. } => 4,
        BpsError::InvalidArgument(_)
        | BpsError::DataShape(_)
        | BpsError::Parse { .. }
        | BpsError::Validation(_)
        | BpsError::Incompatible(_)
        | BpsError::Truncated { .. }
        | BpsError::Io(_)
        | BpsError::Json(_)
        | BpsError::Csv(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SimulateToy(a) => simulate::run(a),
        Command::FitAgents(a) => fit_agents::run(a),
        Command::BuildModifiers(a) => modifiers::run(a),
        Command::Run(a) => run::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::RenderTree(a) => render_tree::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
