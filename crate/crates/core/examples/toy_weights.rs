//! Fits the tree-weighted synthesis to the threshold example and prints the
//! posterior-median weight paths.
//!
//! `cargo run --release -p bpsrt-core --example toy_weights -- [seed]`

use bpsrt_core::agents::{simulate_toy, ToyDgpConfig};
use bpsrt_core::modifiers::{assemble_panel, ModifierIngredients, ModifierSpec};
use bpsrt_core::synthesis::{regime_crossing, run_chain, weight_quantiles, SynthesisData, SynthesisSpec};
use bpsrt_core::McmcConfig;

fn main() -> bpsrt_core::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ToyDgpConfig::default();
    let (y, archive) = simulate_toy(&cfg, seed)?;
    let last = cfg.t_len as i64;
    let ing = ModifierIngredients::new(&archive, &y, &[])?;
    let targets: Vec<i64> = (2..=last).collect();
    let panel = assemble_panel(ModifierSpec::Toy, &ing, &targets, last)?;
    let data = SynthesisData::from_archive(&archive, &y, 2, last)?.with_panel(&panel)?;
    let spec = SynthesisSpec::toy_rt(McmcConfig { n_total: 2000, n_burn: 500, thin: 1, n_chains: 1 });
    let start = std::time::Instant::now();
    let arch = run_chain(&spec, &data, seed, None)?;
    let med = weight_quantiles(&arch, 0.5);
    let w1: Vec<f64> = med.iter().map(|r| r[0]).collect();
    let w2: Vec<f64> = med.iter().map(|r| r[1]).collect();
    let avg = |w: &[f64], a: i64, b: i64| {
        let v: Vec<f64> = targets.iter().zip(w).filter(|(t, _)| (a..=b).contains(*t)).map(|(_, x)| *x).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("seconds {:.1}", start.elapsed().as_secs_f64());
    println!("early  w1 {:.3} w2 {:.3}", avg(&w1, 50, 200), avg(&w2, 50, 200));
    println!("late   w1 {:.3} w2 {:.3}", avg(&w1, 210, 350), avg(&w2, 210, 350));
    println!("crossing {:?}", regime_crossing(&w1, &w2, &targets));
    if let Some(e) = &arch.final_trees_beta {
        println!("final tree {:?}", e.trees[0]);
    }
    Ok(())
}
