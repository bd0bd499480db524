//! `run`: synthesis over every evaluation origin of an experiment.
//!
//! Layout of the output directory:
//! - `draws/target_<label>.jsonl`: draw archive of the origin predicting `<label>`
//! - `predictive/target_<label>.csv`: predictive draws (`draw_index,value`)
//! - `predictive_summary.csv`: mean, sd and quantiles per origin
//! - `columns.json`: modifier column descriptions (tree models)
//! - `run_info.json`: horizon, frequency, agent labels and hashes
//! - `failures.json`: origins that failed, with their error and exit class
//!
//! Origins whose predictive file already carries the current config hash
//! and input digest are skipped, so an interrupted or partly failed run can
//! be resumed by running it again.

use std::path::{Path, PathBuf};

use bpsrt_core::io::{
    format_period, read_table, write_draw_archive, write_table, ExperimentConfig, OutputStamp, Table, FORMAT_VERSION,
};
use bpsrt_core::modifiers::{assemble_panel, ColumnInfo, ModifierIngredients};
use bpsrt_core::synthesis::{run_origin, EstimationWindow, PredictiveDrawSet, SynthesisKind, SynthesisSpec};
use bpsrt_core::{BpsError, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::common::{input_digest, pool, write_json, Inputs};

#[derive(clap::Args)]
pub struct Args {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Origins run in parallel; the config's `workers` wins when set.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// A loaded, validated experiment with its inputs.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub spec: SynthesisSpec,
    pub inputs: Inputs,
    pub stamp: OutputStamp,
    pub frequency: &'static str,
    pub horizon: i64,
    pub window: EstimationWindow,
    pub origins: Vec<i64>,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg = ExperimentConfig::load(path)?;
        let spec = cfg.spec()?;
        spec.validate().map_err(|e| BpsError::config("synthesis", e.to_string()))?;
        let inputs = Inputs::load(&cfg.data.agent_archive, &cfg.data.realized, cfg.data.exogenous.as_deref())?;
        let frequency = cfg.frequency();
        if inputs.manifest.frequency != frequency {
            return Err(BpsError::config(
                "evaluation.first_origin",
                format!(
                    "label frequency {frequency:?} differs from the agent archive's {:?}",
                    inputs.manifest.frequency
                ),
            ));
        }
        let mut paths: Vec<&Path> = vec![&cfg.data.agent_archive, &cfg.data.realized];
        if let Some(p) = &cfg.data.exogenous {
            paths.push(p);
        }
        let stamp = OutputStamp {
            config_hash: cfg.hash()?,
            input_digest: input_digest(&paths)?,
        };
        let first_target = inputs
            .archive
            .first_target()
            .ok_or_else(|| BpsError::DataShape("agent archive is empty".into()))?;
        let window = cfg.window(first_target)?;
        let (first, last) = cfg.origins()?;
        Ok(Self {
            horizon: inputs.archive.horizon() as i64,
            cfg,
            spec,
            inputs,
            stamp,
            frequency,
            window,
            origins: (first..=last).collect(),
        })
    }

    pub fn label(&self, t: i64) -> String {
        format_period(t, self.frequency)
    }

    /// Modifier inputs when the specification uses a panel.
    pub fn ingredients(&self) -> Result<Option<ModifierIngredients<'_>>> {
        if self.spec.kind != SynthesisKind::Rt || self.spec.modifier_spec.is_none() {
            return Ok(None);
        }
        Ok(Some(ModifierIngredients::new(
            &self.inputs.archive,
            &self.inputs.realized,
            &self.inputs.exogenous,
        )?))
    }

    pub fn output_dir(&self) -> &Path {
        &self.cfg.output_dir
    }
}

#[derive(Serialize, Deserialize)]
pub struct RunInfo {
    pub format_version: u32,
    pub config_hash: String,
    pub input_digest: String,
    pub kind: SynthesisKind,
    pub horizon: i64,
    pub frequency: String,
    pub agents: Vec<String>,
}

#[derive(Serialize)]
struct Failure {
    origin: String,
    exit_code: u8,
    error: String,
}

#[derive(Serialize)]
struct FailureManifest {
    format_version: u32,
    config_hash: String,
    failures: Vec<Failure>,
}

#[derive(Serialize)]
struct Columns<'a> {
    format_version: u32,
    gamma: &'a [ColumnInfo],
    beta: &'a [ColumnInfo],
}

pub fn predictive_table(p: &PredictiveDrawSet) -> Table {
    let mut t = Table::new(&["draw_index", "value"]);
    for (i, v) in p.draws.iter().enumerate() {
        t.push_numbers(i.to_string(), [Some(*v)]);
    }
    t
}

/// Draws of a predictive file, in draw order.
pub fn read_predictive(path: &Path) -> Result<(Option<OutputStamp>, Vec<f64>)> {
    let (stamp, table) = read_table(path)?;
    let col = table
        .column("value")
        .ok_or_else(|| BpsError::Parse {
            path: path.display().to_string(),
            row: 1,
            message: "missing `value` column".into(),
        })?;
    let draws = col
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.parse::<f64>().map_err(|_| BpsError::Parse {
                path: path.display().to_string(),
                row: i + 2,
                message: format!("cannot parse {v:?}"),
            })
        })
        .collect::<Result<_>>()?;
    Ok((stamp, draws))
}

fn is_current(path: &Path, draws_path: &Path, stamp: &OutputStamp) -> bool {
    draws_path.is_file() && matches!(read_predictive(path), Ok((Some(s), _)) if &s == stamp)
}

pub fn run(args: Args) -> Result<()> {
    let exp = Experiment::load(&args.config)?;
    let out = exp.output_dir().to_path_buf();
    let draws_dir = out.join("draws");
    let pred_dir = out.join("predictive");
    std::fs::create_dir_all(&draws_dir)?;
    std::fs::create_dir_all(&pred_dir)?;
    let ing = exp.ingredients()?;

    let paths = |o: i64| {
        let label = exp.label(o + exp.horizon);
        (
            pred_dir.join(format!("target_{label}.csv")),
            draws_dir.join(format!("target_{label}.jsonl")),
        )
    };
    let pending: Vec<i64> = exp
        .origins
        .iter()
        .copied()
        .filter(|&o| {
            let (p, d) = paths(o);
            !is_current(&p, &d, &exp.stamp)
        })
        .collect();
    let skipped = exp.origins.len() - pending.len();
    if skipped > 0 {
        eprintln!("resuming: {skipped} origins already done");
    }

    let workers = exp.cfg.workers.or(args.workers);
    let results: Vec<(i64, Result<()>)> = pool(workers)?.install(|| {
        pending
            .par_iter()
            .map(|&o| {
                let r = (|| {
                    let res = run_origin(
                        &exp.spec,
                        &exp.inputs.archive,
                        &exp.inputs.realized,
                        ing.as_ref(),
                        exp.window,
                        o,
                        exp.cfg.seed,
                    )?;
                    let (p, d) = paths(o);
                    write_draw_archive(&res.archive, &d)?;
                    write_table(&p, Some(&exp.stamp), &predictive_table(&res.predictive))?;
                    eprintln!("origin {} done", exp.label(o));
                    Ok(())
                })();
                (o, r)
            })
            .collect()
    });

    let mut failures = vec![];
    let mut first_error = None;
    for (o, r) in results {
        if let Err(e) = r {
            eprintln!("origin {} failed: {e}", exp.label(o));
            failures.push(Failure {
                origin: exp.label(o),
                exit_code: crate::exit_code(&e),
                error: e.to_string(),
            });
            first_error.get_or_insert(e);
        }
    }
    write_json(
        &out.join("failures.json"),
        &FailureManifest {
            format_version: FORMAT_VERSION,
            config_hash: exp.stamp.config_hash.clone(),
            failures,
        },
    )?;
    write_summary(&exp, &out, &paths)?;
    write_json(
        &out.join("run_info.json"),
        &RunInfo {
            format_version: FORMAT_VERSION,
            config_hash: exp.stamp.config_hash.clone(),
            input_digest: exp.stamp.input_digest.clone(),
            kind: exp.spec.kind,
            horizon: exp.horizon,
            frequency: exp.frequency.to_string(),
            agents: exp.inputs.archive.agent_labels().to_vec(),
        },
    )?;
    if let (Some(ing), Some(ms), Some(&last)) = (&ing, exp.spec.modifier_spec, exp.origins.last()) {
        let panel = assemble_panel(ms, ing, &[last + exp.horizon], last)?;
        write_json(
            &out.join("columns.json"),
            &Columns {
                format_version: FORMAT_VERSION,
                gamma: &panel.gamma_columns,
                beta: &panel.beta_columns,
            },
        )?;
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn write_summary(exp: &Experiment, out: &Path, paths: &dyn Fn(i64) -> (PathBuf, PathBuf)) -> Result<()> {
    let mut t = Table::new(&["origin", "target", "n_draws", "mean", "sd", "q05", "q16", "q50", "q84", "q95"]);
    for &o in &exp.origins {
        let (p, d) = paths(o);
        if !is_current(&p, &d, &exp.stamp) {
            continue;
        }
        let (_, draws) = read_predictive(&p)?;
        let set = PredictiveDrawSet::from_draws(o + exp.horizon, draws);
        let n = set.draws.len() as f64;
        let sd = (set.draws.iter().map(|x| (x - set.mean).powi(2)).sum::<f64>() / n).sqrt();
        let q = |level: f64| {
            set.quantiles
                .iter()
                .find(|(a, _)| (a - level).abs() < 1e-9)
                .map(|(_, v)| *v)
        };
        let mut row = vec![exp.label(o), exp.label(o + exp.horizon), set.draws.len().to_string()];
        let mut nums = Table::default();
        nums.push_numbers("", [Some(set.mean), Some(sd), q(0.05), q(0.16), q(0.5), q(0.84), q(0.95)]);
        row.extend(nums.rows.remove(0).into_iter().skip(1));
        t.push(row);
    }
    write_table(&out.join("predictive_summary.csv"), Some(&exp.stamp), &t)
}
