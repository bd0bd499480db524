//! Recursive one-step forecasts of the threshold example with tree and
//! random-walk weights, scored by mean CRPS over origins around the break.
//!
//! `cargo run --release -p bpsrt-core --example toy_compare -- [seed]`

use bpsrt_core::agents::{simulate_toy, ToyDgpConfig};
use bpsrt_core::eval::sample_crps;
use bpsrt_core::modifiers::{ModifierIngredients, ModifierSpec};
use bpsrt_core::synthesis::{forecast_origin, origin_seed, AgentDensityMode, SynthesisKind, SynthesisSpec};
use bpsrt_core::McmcConfig;

fn main() -> bpsrt_core::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = ToyDgpConfig::default();
    let (y, archive) = simulate_toy(&cfg, seed)?;
    let ing = ModifierIngredients::new(&archive, &y, &[])?;
    let mcmc = McmcConfig { n_total: 2000, n_burn: 500, thin: 1, n_chains: 1 };
    let only: Option<String> = std::env::args().nth(2);
    let specs = [
        ("rt-toy", SynthesisSpec::toy_rt(mcmc)),
        ("rt-gamma", SynthesisSpec { fix_gamma_zero: false, ..SynthesisSpec::toy_rt(mcmc) }),
        ("rt-toy-s10", SynthesisSpec { n_trees: 10, ..SynthesisSpec::toy_rt(mcmc) }),
        (
            "rt-free",
            SynthesisSpec {
                mcmc,
                modifier_spec: Some(ModifierSpec::Toy),
                agent_density: AgentDensityMode::Analytic,
                ..SynthesisSpec::new(SynthesisKind::Rt)
            },
        ),
        ("rw", SynthesisSpec { mcmc, agent_density: AgentDensityMode::Analytic, ..SynthesisSpec::new(SynthesisKind::Rw) }),
    ];
    let origins: Vec<i64> = (170..230).collect();
    for (name, spec) in &specs {
        if only.as_deref().is_some_and(|o| o != *name) {
            continue;
        }
        let (mut pre, mut post) = (0.0, 0.0);
        for &o in &origins {
            let s = origin_seed(seed, o);
            let ing = (spec.kind == SynthesisKind::Rt).then_some(&ing);
            let (_, p) = forecast_origin(spec, &archive, &y, ing, 2, o, s)?;
            let c = sample_crps(&p.draws, y.at(o + 1).unwrap())?;
            if o + 1 <= cfg.break_t as i64 { pre += c } else { post += c }
        }
        println!("seed {seed} {name}: pre {:.4} post {:.4} all {:.4}", pre / 30.0, post / 30.0, (pre + post) / 60.0);
    }
    Ok(())
}
