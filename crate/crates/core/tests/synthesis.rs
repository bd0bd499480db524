//! End-to-end synthesis properties through the public API: agent-label
//! equivariance and bit-identical reruns.

use bpsrt_core::agents::{simulate_toy, ToyDgpConfig};
use bpsrt_core::io::{read_draw_archive, write_draw_archive};
use bpsrt_core::modifiers::{assemble_panel, ModifierIngredients, ModifierSpec};
use bpsrt_core::synthesis::{run_chain, run_origin, DrawArchive, EstimationWindow, SynthesisData, SynthesisSpec};
use bpsrt_core::{AgentForecastArchive, ArchiveRow, McmcConfig, TimeSeriesF};

fn toy(t_len: usize, seed: u64) -> (TimeSeriesF, AgentForecastArchive) {
    let cfg = ToyDgpConfig {
        t_len,
        break_t: t_len / 2,
        draws_per_forecast: 200,
        ..ToyDgpConfig::default()
    };
    simulate_toy(&cfg, seed).unwrap()
}

fn swapped(archive: &AgentForecastArchive) -> AgentForecastArchive {
    let rows = archive
        .rows()
        .iter()
        .map(|r| ArchiveRow {
            target_period: r.target_period,
            forecasts: r.forecasts.iter().rev().cloned().collect(),
        })
        .collect();
    let labels = archive.agent_labels().iter().rev().cloned().collect();
    AgentForecastArchive::new(archive.horizon(), labels, rows).unwrap()
}

fn fit(spec: &SynthesisSpec, y: &TimeSeriesF, archive: &AgentForecastArchive, seed: u64) -> DrawArchive {
    let last = archive.last_target().unwrap() - 1;
    let ing = ModifierIngredients::new(archive, y, &[]).unwrap();
    let targets: Vec<i64> = (2..=last).collect();
    let panel = assemble_panel(ModifierSpec::Toy, &ing, &targets, last).unwrap();
    let data = SynthesisData::from_archive(archive, y, 2, last).unwrap().with_panel(&panel).unwrap();
    run_chain(spec, &data, seed, None).unwrap()
}

/// Per-draw summary with the standard error of its chain mean from 40 batch means.
fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let b = 40;
    let size = v.len() / b;
    let means: Vec<f64> = (0..b)
        .map(|i| v[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1) as f64;
    (m, (var / b as f64).sqrt())
}

#[test]
fn relabelling_agents_permutes_the_weights() {
    let (y, archive) = toy(160, 3);
    let spec = SynthesisSpec::toy_rt(McmcConfig {
        n_total: 5000,
        n_burn: 1000,
        thin: 1,
        n_chains: 1,
    });
    let a = fit(&spec, &y, &archive, 11);
    let b = fit(&spec, &y, &swapped(&archive), 12);
    let t_len = a.y.len();
    let avg_weight = |arch: &DrawArchive, j: usize| -> Vec<f64> {
        arch.draws
            .iter()
            .map(|d| (0..t_len).map(|t| d.weight(t, j)).sum::<f64>() / t_len as f64)
            .collect()
    };
    for j in 0..2 {
        let (ma, sa) = mean_and_se(&avg_weight(&a, j));
        let (mb, sb) = mean_and_se(&avg_weight(&b, 1 - j));
        let se = (sa * sa + sb * sb).sqrt();
        assert!((ma - mb).abs() < 3.0 * se, "agent {j}: {ma} vs {mb} (se {se})");
    }
    let splits = |arch: &DrawArchive| -> Vec<f64> {
        arch.draws.iter().map(|d| d.split_counts_beta.iter().sum::<usize>() as f64).collect()
    };
    let (ma, sa) = mean_and_se(&splits(&a));
    let (mb, sb) = mean_and_se(&splits(&b));
    let se = (sa * sa + sb * sb).sqrt().max(1e-9);
    assert!((ma - mb).abs() < 3.0 * se, "split counts {ma} vs {mb} (se {se})");
}

#[test]
fn origin_runs_and_archives_are_bit_identical() {
    let (y, archive) = toy(60, 4);
    let ing = ModifierIngredients::new(&archive, &y, &[]).unwrap();
    let spec = SynthesisSpec::toy_rt(McmcConfig {
        n_total: 120,
        n_burn: 20,
        thin: 2,
        n_chains: 2,
    });
    let window = EstimationWindow::Rolling { length: 30 };
    let a = run_origin(&spec, &archive, &y, Some(&ing), window, 50, 8).unwrap();
    let b = run_origin(&spec, &archive, &y, Some(&ing), window, 50, 8).unwrap();
    assert_eq!(a.window, (21, 50));
    assert_eq!(a.archive, b.archive);
    assert_eq!(a.predictive, b.predictive);

    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_draw_archive(&a.archive, &pa).unwrap();
    write_draw_archive(&b.archive, &pb).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    assert_eq!(read_draw_archive(&pa, None).unwrap(), a.archive);

    let c = run_origin(&spec, &archive, &y, Some(&ing), window, 50, 9).unwrap();
    assert_ne!(c.predictive.draws, a.predictive.draws);
}
