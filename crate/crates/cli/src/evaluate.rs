//! `evaluate`: scores of run directories against a benchmark run.
//!
//! One CSV per result family:
//! - `scores.csv`: per model and target, point forecast and all scores
//! - `ratios.csv`: metric ratios model/benchmark, one column per model, DM stars
//! - `dm.csv`: Diebold-Mariano statistics behind the stars
//! - `pits.csv`, `pit_summary.csv`: randomized PITs and the uniformity test
//! - `fluctuation.csv`: rolling relative CRPS statistic per model
//! - `prob_diff.csv`: probability differences model minus benchmark per bin
//! - `skewness.csv`: quantile skewness of the predictive densities
//! - `weights.csv`: weight quantiles over the last origin's estimation window
//! - `inclusion.csv`: modifier split shares per origin (tree models)
//! - `incompleteness.csv`, `shrinkage.csv`: per-origin R² measures

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use bpsrt_core::eval::{
    dm_test, fluctuation_test, modifier_inclusion, pits, probability_difference_map, quantile_skewness, quantile_sorted,
    ScoreSeries, ZeroSplitPolicy, FLUCTUATION_CRITICAL_10PCT,
};
use bpsrt_core::io::{
    format_period, hash_json, read_draw_archive, read_series, write_table, OutputStamp, Table,
};
use bpsrt_core::modifiers::ColumnInfo;
use bpsrt_core::synthesis::{incompleteness_r2, shrinkage_r2, weight_quantiles, DrawArchive};
use bpsrt_core::{BpsError, Result, RngHandle, Step};
use serde::{Deserialize, Serialize};

use crate::common::{input_digest, parse_named, target_files};
use crate::run::{read_predictive, RunInfo};

const METRICS: [&str; 5] = ["rmse", "crps", "qw_tails", "qw_left", "qw_right"];

#[derive(clap::Args)]
pub struct Args {
    /// Run directory to evaluate, as NAME=DIR; repeatable.
    #[arg(long = "model", value_parser = parse_named, required = true)]
    pub models: Vec<(String, PathBuf)>,
    /// Benchmark run directory, as NAME=DIR.
    #[arg(long, value_parser = parse_named)]
    pub benchmark: (String, PathBuf),
    /// Realized target series (`period,value`).
    #[arg(long)]
    pub realized: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the PIT randomization.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Forecast horizon; read from the runs when absent.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Rolling window of the fluctuation test as a share of the sample.
    #[arg(long, default_value_t = 0.10)]
    pub fluctuation_window: f64,
    /// Critical value of the fluctuation test.
    #[arg(long, default_value_t = FLUCTUATION_CRITICAL_10PCT)]
    pub fluctuation_critical: f64,
    /// Equal-width bins of the probability-difference map.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Serialize)]
struct Settings<'a> {
    models: Vec<&'a str>,
    benchmark: &'a str,
    seed: u64,
    horizon: usize,
    fluctuation_window: f64,
    fluctuation_critical: f64,
    bins: usize,
}

#[derive(Deserialize)]
struct RunColumns {
    gamma: Vec<ColumnInfo>,
    beta: Vec<ColumnInfo>,
}

/// Predictive draws of one run, by target.
struct RunData {
    name: String,
    dir: PathBuf,
    info: Option<RunInfo>,
    targets: Vec<i64>,
    draws: Vec<Vec<f64>>,
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn load_run(name: &str, dir: &Path) -> Result<RunData> {
    let info_path = dir.join("run_info.json");
    let info: Option<RunInfo> = if info_path.is_file() {
        Some(serde_json::from_str(&std::fs::read_to_string(&info_path)?)?)
    } else {
        None
    };
    let freq = info.as_ref().map(|i| i.frequency.clone());
    let files = target_files(&dir.join("predictive"), ".csv", freq.as_deref())?;
    if files.is_empty() {
        return Err(BpsError::DataShape(format!("{name}: no predictive files in {}", dir.display())));
    }
    let mut targets = vec![];
    let mut draws = vec![];
    for (t, p) in files {
        targets.push(t);
        draws.push(read_predictive(&p)?.1);
    }
    Ok(RunData {
        name: name.to_string(),
        dir: dir.to_path_buf(),
        info,
        targets,
        draws,
    })
}

fn check_alignment(runs: &[RunData], bench: &RunData, realized: &bpsrt_core::TimeSeriesF) -> Result<()> {
    let want: BTreeSet<i64> = bench.targets.iter().copied().collect();
    let mut problems = vec![];
    for r in runs {
        let have: BTreeSet<i64> = r.targets.iter().copied().collect();
        let missing: Vec<_> = want.difference(&have).collect();
        let extra: Vec<_> = have.difference(&want).collect();
        if !missing.is_empty() || !extra.is_empty() {
            problems.push(format!("{}: missing targets {missing:?}, extra targets {extra:?}", r.name));
        }
    }
    let unrealized: Vec<_> = bench.targets.iter().filter(|t| realized.at(**t).is_none()).collect();
    if !unrealized.is_empty() {
        problems.push(format!("no realization for targets {unrealized:?}"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(BpsError::DataShape(format!("misaligned origins: {}", problems.join("; "))))
    }
}

fn metric_losses(s: &ScoreSeries, metric: &str) -> Vec<f64> {
    let col = if metric == "rmse" { "squared_error" } else { metric };
    s.column(col).expect("known metric")
}

fn metric_value(s: &ScoreSeries, metric: &str) -> f64 {
    if metric == "rmse" {
        s.rmse()
    } else {
        let l = metric_losses(s, metric);
        l.iter().sum::<f64>() / l.len() as f64
    }
}

/// Draw archives of a run in target order, when present.
fn draw_archives(run: &RunData) -> Result<Vec<(i64, PathBuf)>> {
    let freq = run.info.as_ref().map(|i| i.frequency.as_str());
    target_files(&run.dir.join("draws"), ".jsonl", freq)
}

fn modifier_labels(run: &RunData, block: &str, k: usize) -> Vec<String> {
    let parsed: Option<RunColumns> = std::fs::read_to_string(run.dir.join("columns.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    let cols = parsed.map(|c| if block == "gamma" { c.gamma } else { c.beta });
    match cols {
        Some(c) if c.len() == k => c.into_iter().map(|c| c.label).collect(),
        _ => (0..k).map(|i| format!("z{}", i + 1)).collect(),
    }
}

pub fn run(args: Args) -> Result<()> {
    let realized = read_series(&args.realized)?;
    let bench = load_run(&args.benchmark.0, &args.benchmark.1)?;
    let models = args
        .models
        .iter()
        .map(|(n, d)| load_run(n, d))
        .collect::<Result<Vec<_>>>()?;
    check_alignment(&models, &bench, &realized)?;

    let freq = bench
        .info
        .as_ref()
        .map(|i| i.frequency.clone())
        .unwrap_or_default();
    let label = |t: i64| format_period(t, &freq);
    let horizon = args
        .horizon
        .or_else(|| bench.info.as_ref().map(|i| i.horizon.max(1) as usize))
        .unwrap_or(1);
    let targets = bench.targets.clone();
    let y: Vec<f64> = targets.iter().map(|t| realized.at(*t).expect("checked above")).collect();

    let mut digest_inputs: Vec<PathBuf> = vec![args.realized.clone(), bench.dir.join("predictive")];
    digest_inputs.extend(models.iter().map(|m| m.dir.join("predictive")));
    let digest_refs: Vec<&Path> = digest_inputs.iter().map(PathBuf::as_path).collect();
    let settings = Settings {
        models: models.iter().map(|m| m.name.as_str()).collect(),
        benchmark: &bench.name,
        seed: args.seed,
        horizon,
        fluctuation_window: args.fluctuation_window,
        fluctuation_critical: args.fluctuation_critical,
        bins: args.bins,
    };
    let stamp = OutputStamp {
        config_hash: hash_json(&settings)?,
        input_digest: input_digest(&digest_refs)?,
    };
    let out = &args.out;
    std::fs::create_dir_all(out)?;
    let write = |name: &str, t: &Table| write_table(&out.join(name), Some(&stamp), t);

    // Models aligned to the benchmark's target order.
    let aligned: Vec<Vec<Vec<f64>>> = models
        .iter()
        .map(|m| {
            targets
                .iter()
                .map(|t| m.draws[m.targets.binary_search(t).expect("aligned")].clone())
                .collect()
        })
        .collect();
    let bench_scores = ScoreSeries::compute(&targets, &bench.draws, &y)?;
    let model_scores = aligned
        .iter()
        .map(|d| ScoreSeries::compute(&targets, d, &y))
        .collect::<Result<Vec<_>>>()?;

    // scores
    let mut t = Table::new(&[
        "model", "target", "realized", "point", "crps", "qw_tails", "qw_left", "qw_right", "squared_error",
    ]);
    let all_scores = model_scores.iter().zip(models.iter().map(|m| &m.name)).chain([(&bench_scores, &bench.name)]);
    for (s, name) in all_scores.clone() {
        for r in &s.rows {
            t.push(vec![
                name.clone(),
                label(r.origin),
                num(r.realized),
                num(r.point),
                num(r.crps),
                num(r.qw_tails),
                num(r.qw_left),
                num(r.qw_right),
                num(r.squared_error),
            ]);
        }
    }
    write("scores.csv", &t)?;

    // ratios and DM tests
    let mut headers = vec!["metric"];
    headers.extend(models.iter().map(|m| m.name.as_str()));
    let mut ratios = Table::new(&headers);
    let mut dm = Table::new(&["model", "metric", "statistic", "p_value", "degenerate"]);
    for metric in METRICS {
        let mut row = vec![metric.to_string()];
        let b = metric_value(&bench_scores, metric);
        for (m, s) in models.iter().zip(&model_scores) {
            let test = dm_test(&metric_losses(s, metric), &metric_losses(&bench_scores, metric), horizon).ok();
            let stars = test.as_ref().map_or("", |d| d.stars());
            let ratio = metric_value(s, metric) / b;
            row.push(if ratio.is_finite() { format!("{ratio:.4}{stars}") } else { String::new() });
            if let Some(d) = test {
                dm.push(vec![
                    m.name.clone(),
                    metric.to_string(),
                    num(d.statistic),
                    opt(d.p_value),
                    d.degenerate.to_string(),
                ]);
            }
        }
        ratios.push(row);
    }
    write("ratios.csv", &ratios)?;
    write("dm.csv", &dm)?;

    // PITs
    let mut pit_rows = Table::new(&["model", "target", "pit"]);
    let mut pit_summary = Table::new(&["model", "n", "ks_statistic", "band", "inside_band"]);
    let all_draws = aligned.iter().zip(models.iter().map(|m| &m.name)).chain([(&bench.draws, &bench.name)]);
    for (i, (draws, name)) in all_draws.clone().enumerate() {
        let mut rng = RngHandle::for_task(args.seed, 0, Step::Evaluation, i as u64);
        match pits(draws, &y, &mut rng) {
            Ok(p) => {
                for (tgt, v) in targets.iter().zip(&p.values) {
                    pit_rows.push(vec![name.clone(), label(*tgt), num(*v)]);
                }
                pit_summary.push(vec![
                    name.clone(),
                    p.values.len().to_string(),
                    num(p.ks_statistic),
                    num(p.band),
                    p.inside_band().to_string(),
                ]);
            }
            Err(e) => eprintln!("{name}: PIT test skipped: {e}"),
        }
    }
    write("pits.csv", &pit_rows)?;
    write("pit_summary.csv", &pit_summary)?;

    // fluctuation test on CRPS
    let mut fl = Table::new(&["model", "target", "statistic", "critical_value", "window"]);
    for (m, s) in models.iter().zip(&model_scores) {
        match fluctuation_test(
            &metric_losses(s, "crps"),
            &metric_losses(&bench_scores, "crps"),
            args.fluctuation_window,
            horizon,
            args.fluctuation_critical,
        ) {
            Ok(f) => {
                for (i, v) in f.statistics.iter().enumerate() {
                    fl.push(vec![
                        m.name.clone(),
                        label(targets[i + f.window - 1]),
                        num(*v),
                        num(f.critical_value),
                        f.window.to_string(),
                    ]);
                }
            }
            Err(e) => eprintln!("{}: fluctuation test skipped: {e}", m.name),
        }
    }
    write("fluctuation.csv", &fl)?;

    // probability differences on bins spanning the pooled 1st to 99th percentiles
    let mut pd = Table::new(&["model", "target", "bin_left", "bin_right", "difference"]);
    if args.bins == 0 {
        return Err(BpsError::config("bins", "must be positive"));
    }
    for (m, draws) in models.iter().zip(&aligned) {
        let mut pooled: Vec<f64> = draws.iter().chain(&bench.draws).flatten().copied().collect();
        pooled.sort_by(f64::total_cmp);
        let (lo, hi) = (quantile_sorted(&pooled, 0.01), quantile_sorted(&pooled, 0.99));
        if !(hi > lo) {
            eprintln!("{}: probability map skipped: degenerate draw range", m.name);
            continue;
        }
        let edges: Vec<f64> = (0..=args.bins)
            .map(|k| lo + (hi - lo) * k as f64 / args.bins as f64)
            .collect();
        let map = probability_difference_map(draws, &bench.draws, &edges)?;
        for (tgt, row) in targets.iter().zip(&map) {
            for (k, d) in row.iter().enumerate() {
                pd.push(vec![m.name.clone(), label(*tgt), num(edges[k]), num(edges[k + 1]), num(*d)]);
            }
        }
    }
    write("prob_diff.csv", &pd)?;

    // skewness
    let mut sk = Table::new(&["model", "target", "skewness"]);
    for (draws, name) in all_draws {
        for (tgt, d) in targets.iter().zip(draws) {
            let v = quantile_skewness(d).ok().flatten();
            sk.push(vec![name.clone(), label(*tgt), opt(v)]);
        }
    }
    write("skewness.csv", &sk)?;

    draw_tables(&models, &bench, &label, &write)?;
    eprintln!(
        "evaluated {} models against {} over {} targets into {}",
        models.len(),
        bench.name,
        targets.len(),
        out.display()
    );
    Ok(())
}

/// Tables computed from the stored draw archives.
fn draw_tables(
    models: &[RunData],
    bench: &RunData,
    label: &dyn Fn(i64) -> String,
    write: &dyn Fn(&str, &Table) -> Result<()>,
) -> Result<()> {
    let mut weights = Table::new(&["model", "target", "agent", "q05", "q50", "q95"]);
    let mut inclusion = Table::new(&["model", "target", "block", "modifier", "share", "mean_total_splits"]);
    let mut incompleteness = Table::new(&["model", "target", "r2"]);
    let mut shrinkage = Table::new(&["model", "target", "gamma", "beta"]);
    for run in models.iter().chain([bench]) {
        let files = draw_archives(run)?;
        for (idx, (tgt, path)) in files.iter().enumerate() {
            let a: DrawArchive = read_draw_archive(path, None)?;
            incompleteness.push(vec![run.name.clone(), label(*tgt), opt(incompleteness_r2(&a))]);
            let s = shrinkage_r2(&a);
            shrinkage.push(vec![run.name.clone(), label(*tgt), opt(s.gamma), opt(s.beta)]);
            for (block, counts) in [
                ("gamma", a.draws.iter().map(|d| d.split_counts_gamma.clone()).collect::<Vec<_>>()),
                ("beta", a.draws.iter().map(|d| d.split_counts_beta.clone()).collect()),
            ] {
                let k = counts.first().map_or(0, Vec::len);
                if k == 0 {
                    continue;
                }
                let inc = modifier_inclusion(&counts, ZeroSplitPolicy::Drop)?;
                for (name, share) in modifier_labels(run, block, k).into_iter().zip(&inc.shares) {
                    inclusion.push(vec![
                        run.name.clone(),
                        label(*tgt),
                        block.to_string(),
                        name,
                        num(*share),
                        num(inc.mean_total_splits),
                    ]);
                }
            }
            if idx + 1 == files.len() {
                let agents: Vec<String> = match &run.info {
                    Some(i) if i.agents.len() == a.n_agents => i.agents.clone(),
                    _ => (1..=a.n_agents).map(|j| format!("agent{j}")).collect(),
                };
                let qs: Vec<Vec<Vec<f64>>> = [0.05, 0.5, 0.95].iter().map(|q| weight_quantiles(&a, *q)).collect();
                for (t, wt) in a.targets.iter().enumerate() {
                    for (j, agent) in agents.iter().enumerate() {
                        weights.push(vec![
                            run.name.clone(),
                            label(*wt),
                            agent.clone(),
                            num(qs[0][t][j]),
                            num(qs[1][t][j]),
                            num(qs[2][t][j]),
                        ]);
                    }
                }
            }
        }
    }
    write("weights.csv", &weights)?;
    write("inclusion.csv", &inclusion)?;
    write("incompleteness.csv", &incompleteness)?;
    write("shrinkage.csv", &shrinkage)
}
