//! Property tests of invariants that hold for arbitrary inputs.

use bpsrt_core::eval::{modifier_inclusion, pits, quantile_score, sample_crps, ZeroSplitPolicy};
use bpsrt_core::io::{format_period, parse_period, ExperimentConfig};
use bpsrt_core::shrinkage::{gibbs_update_horseshoe, DeviationStats, HorseshoeState};
use bpsrt_core::synthesis::origin_seed;
use bpsrt_core::tree::{EnsembleTarget, TreeEnsemble, TreeNode};
use bpsrt_core::{Matrix, RngHandle};
use proptest::prelude::*;

const K: usize = 3;

fn tree_strategy() -> impl Strategy<Value = TreeNode> {
    let leaf = (-2.0..2.0f64).prop_map(TreeNode::leaf);
    leaf.prop_recursive(5, 32, 2, |inner| {
        (0..K, -1.5..1.5f64, inner.clone(), inner).prop_map(|(k, thr, l, r)| TreeNode::split(k, thr, l, r))
    })
}

fn matrix_strategy() -> impl Strategy<Value = Matrix> {
    (1..40usize).prop_flat_map(|n| {
        prop::collection::vec(-2.0..2.0f64, n * K).prop_map(move |v| Matrix::from_rows(n, K, v).unwrap())
    })
}

const CONFIG: &str = r#"
format_version = 1
seed = 7
output_dir = "out"

[data]
agent_archive = "agents"
realized = "y.csv"

[synthesis]
kind = "rt"
modifier_spec = "features"

[evaluation]
first_origin = "2010Q1"
last_origin = "2012Q4"
window = "expanding"
"#;

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_row_reaches_exactly_one_terminal(tree in tree_strategy(), z in matrix_strategy()) {
        let leaves = tree.leaf_values();
        prop_assert_eq!(leaves.len(), tree.n_terminals());
        let routed = tree.route_rows(&z);
        prop_assert_eq!(routed.len(), z.rows());
        let mut counts = vec![0usize; leaves.len()];
        for (i, leaf) in routed.iter().enumerate() {
            prop_assert!(*leaf < leaves.len());
            counts[*leaf] += 1;
            let row: Vec<f64> = (0..K).map(|k| z.get(i, k)).collect();
            prop_assert_eq!(tree.evaluate(&row), leaves[*leaf]);
        }
        prop_assert_eq!(counts.iter().sum::<usize>(), z.rows());
    }

    #[test]
    fn ensemble_value_is_sum_of_trees(trees in prop::collection::vec(tree_strategy(), 1..6), z in matrix_strategy()) {
        let ens = TreeEnsemble { trees: trees.clone(), target: EnsembleTarget::Beta, n_modifiers: K };
        let fit = ens.evaluate_rows(&z);
        for (i, v) in fit.iter().enumerate() {
            let row: Vec<f64> = (0..K).map(|k| z.get(i, k)).collect();
            let direct: f64 = trees.iter().map(|t| t.evaluate(&row)).sum();
            prop_assert!((v - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn horseshoe_scales_stay_positive(
        devs in prop::collection::vec(prop_oneof![Just(0.0), 1e-12..1e-6f64, 1e-3..1e6f64], 1..6),
        seed in any::<u64>(),
    ) {
        let mut rng = RngHandle::new(seed, 0);
        let stats: Vec<DeviationStats> = devs.iter().map(|d| DeviationStats::single(*d)).collect();
        let mut s = HorseshoeState::new(devs.len());
        for _ in 0..20 {
            s = gibbs_update_horseshoe(&s, &stats, &mut rng).unwrap();
            prop_assert!(s.taus().iter().all(|t| t.is_finite() && *t > 0.0));
        }
    }

    #[test]
    fn crps_is_nonnegative_and_location_scale_equivariant(
        draws in prop::collection::vec(-10.0..10.0f64, 2..60),
        y in -12.0..12.0f64,
        shift in -5.0..5.0f64,
        scale in 0.1..10.0f64,
    ) {
        let c = sample_crps(&draws, y).unwrap();
        prop_assert!(c >= 0.0);
        let moved: Vec<f64> = draws.iter().map(|d| scale * d + shift).collect();
        let c2 = sample_crps(&moved, scale * y + shift).unwrap();
        prop_assert!((c2 - scale * c).abs() <= 1e-9 * (1.0 + scale * c));
    }

    #[test]
    fn quantile_scores_are_nonnegative(q in -5.0..5.0f64, y in -5.0..5.0f64, alpha in 0.01..0.99f64) {
        prop_assert!(quantile_score(q, y, alpha) >= 0.0);
    }

    #[test]
    fn pits_lie_in_the_unit_interval(
        sets in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 1..30), 20..40),
        seed in any::<u64>(),
    ) {
        let realized: Vec<f64> = sets.iter().enumerate().map(|(i, s)| s[0] + (i as f64 % 3.0) - 1.0).collect();
        let mut rng = RngHandle::new(seed, 0);
        let r = pits(&sets, &realized, &mut rng).unwrap();
        prop_assert!(r.values.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(r.ks_statistic >= 0.0 && r.ks_statistic <= 1.0);
    }

    #[test]
    fn inclusion_shares_sum_to_one(counts in prop::collection::vec(prop::collection::vec(0..5usize, 4), 1..30)) {
        let s = modifier_inclusion(&counts, ZeroSplitPolicy::Uniform).unwrap();
        prop_assert!((s.shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(s.shares.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn period_labels_round_trip(t in 0i64..10_000, freq in prop::sample::select(vec!["Q", "M", ""])) {
        prop_assert_eq!(parse_period(&format_period(t, freq), freq).unwrap(), t);
    }

    #[test]
    fn config_hash_ignores_location_and_workers(dir in "[a-z]{1,12}", workers in prop::option::of(1..64usize)) {
        let base = ExperimentConfig::parse(CONFIG).unwrap();
        let mut moved = base.clone();
        moved.output_dir = dir.into();
        moved.workers = workers;
        prop_assert_eq!(base.hash().unwrap(), moved.hash().unwrap());
        let mut reseeded = base.clone();
        reseeded.seed += 1;
        prop_assert_ne!(base.hash().unwrap(), reseeded.hash().unwrap());
    }

    #[test]
    fn origin_seeds_are_a_function_of_seed_and_origin(seed in any::<u64>(), a in -1000i64..1000, b in -1000i64..1000) {
        prop_assert_eq!(origin_seed(seed, a), origin_seed(seed, a));
        if a != b {
            prop_assert_ne!(origin_seed(seed, a), origin_seed(seed, b));
        }
    }
}
