mod support;

use proptest::prelude::*;
use symprune::dsnot::{finetune, DsnotConfig};
use symprune::masking::{
    build_nm_mask, build_unstructured_mask, ComparisonGroup, MaskPattern, NmAxis, SparsityMask,
};
use symprune::rng::stream_rng;
use symprune::scores::{
    compute_scores, score_lp, score_ria, score_stochria, ScoreConfig, ScoreInputs, ScoreMethod,
    Strategy as Reweighting,
};
use symprune::verification::{deviation, g_matrix};
use symprune::{sym_objective, ActivationStats, DenseMatrix, NormOrder, ScoreMatrix};

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop_oneof![4 => -10.0..10.0f64, 1 => Just(0.0)], r * c)
            .prop_map(move |v| DenseMatrix::new(r, c, v).unwrap())
    })
}

fn f32_matrix() -> impl Strategy<Value = DenseMatrix> {
    (0..=6usize, 0..=6usize).prop_flat_map(|(r, c)| {
        prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), r * c)
            .prop_map(move |v| {
                DenseMatrix::new(r, c, v.into_iter().map(f64::from).collect()).unwrap()
            })
    })
}

fn tokens_for(features: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=12usize).prop_flat_map(move |t| {
        prop::collection::vec(-5.0..5.0f64, t * features)
            .prop_map(move |v| DenseMatrix::new(t, features, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symw_round_trip_is_exact_for_f32_values(m in f32_matrix()) {
        let back = DenseMatrix::from_symw_bytes(&m.to_symw_bytes()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn symm_round_trip(bits in prop::collection::vec(any::<bool>(), 1..80), eps in 0.0f32..1.0) {
        let cols = 1 + bits.len() % 7;
        let rows = bits.len() / cols;
        prop_assume!(rows > 0);
        let bits = &bits[..rows * cols];
        let mask = SparsityMask::from_bools(rows, cols, bits, MaskPattern::Unstructured { epsilon: eps }).unwrap();
        let back = SparsityMask::from_bytes(&mask.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back, mask);
    }

    #[test]
    fn scores_are_finite_non_negative_and_zero_on_zero_weights(
        w in matrix(7, 7),
        method_idx in 0usize..ScoreMethod::ALL.len(),
        alpha in 0.0..2.0f64,
        p_idx in 0usize..NormOrder::ALL.len(),
        strategy_idx in 0usize..4,
        seed in any::<u64>(),
    ) {
        let stats = ActivationStats::compute(&DenseMatrix::from_fn(5, w.rows(), |t, j| (t * 3 + j) as f64 - 4.0));
        let out: Vec<f64> = (0..w.cols()).map(|k| k as f64 * 0.5).collect();
        let config = ScoreConfig {
            method: ScoreMethod::ALL[method_idx],
            alpha,
            p: NormOrder::ALL[p_idx],
            beta: 0.5,
            seed,
            strategy: [Reweighting::S1, Reweighting::S2, Reweighting::S3, Reweighting::S4][strategy_idx],
            ..ScoreConfig::default()
        };
        let inputs = ScoreInputs { stats: Some(&stats), output_norms: Some(&out) };
        let s = compute_scores(&w, inputs, &config).unwrap();
        prop_assert_eq!(s.shape(), w.shape());
        for (v, wv) in s.values().iter().zip(w.values()) {
            prop_assert!(v.is_finite() && *v >= 0.0);
            if *wv == 0.0 {
                prop_assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn relative_importance_is_scale_invariant(w in matrix(6, 6), scale in 0.01..100.0f64, p_idx in 1usize..NormOrder::ALL.len()) {
        let p = NormOrder::ALL[p_idx];
        let a = score_lp(&w, p);
        let b = score_lp(&w.scale(scale), p);
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(deviation(*y, *x) <= 1e-9);
        }
    }

    #[test]
    fn full_support_stochria_matches_ria(n in 1usize..10, seed in any::<u64>(), alpha in 0.0..1.5f64) {
        let mut rng = stream_rng(seed, 0, 0);
        let w = symprune::verification::random_matrix(&mut rng, n, n);
        let stats = ActivationStats::compute(&symprune::verification::random_matrix(&mut rng, 4, n));
        let a = score_stochria(&w, Some(&stats), alpha, 1.0, seed).unwrap();
        let b = score_ria(&w, &stats, alpha, NormOrder::One).unwrap();
        prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn unstructured_masks_prune_floor_count_per_group(
        w in matrix(8, 8),
        eps in 0.0..0.99f64,
        group_idx in 0usize..3,
    ) {
        let group = [ComparisonGroup::PerLayer, ComparisonGroup::PerRow, ComparisonGroup::PerColumn][group_idx];
        let scores = ScoreMatrix::new(w.map(f64::abs)).unwrap();
        let mask = build_unstructured_mask(&scores, eps, group).unwrap();
        for members in group.groups(w.rows(), w.cols()) {
            let zeros = members.iter().filter(|&&i| !mask.get_linear(i)).count();
            prop_assert_eq!(zeros, (eps * members.len() as f64).floor() as usize);
            // every pruned score is <= every kept score in the group
            let max_pruned = members.iter().filter(|&&i| !mask.get_linear(i)).map(|&i| scores.values()[i]).fold(f64::NEG_INFINITY, f64::max);
            let min_kept = members.iter().filter(|&&i| mask.get_linear(i)).map(|&i| scores.values()[i]).fold(f64::INFINITY, f64::min);
            prop_assert!(max_pruned <= min_kept);
        }
    }

    #[test]
    fn nm_masks_keep_exactly_n(groups in 1usize..5, cols in 1usize..6, n in 1usize..4, seed in any::<u64>()) {
        let m = 4;
        let mut rng = stream_rng(seed, 1, 0);
        let w = symprune::verification::random_matrix(&mut rng, groups * m, cols);
        let scores = ScoreMatrix::new(w.map(f64::abs)).unwrap();
        let mask = build_nm_mask(&scores, n, m, NmAxis::InputDim).unwrap();
        for members in NmAxis::InputDim.groups(groups * m, cols, m).unwrap() {
            prop_assert_eq!(members.iter().filter(|&&i| mask.get_linear(i)).count(), n);
        }
        prop_assert_eq!(mask.count_ones(), n * groups * cols);
    }

    #[test]
    fn single_prune_cost_identity(w in matrix(5, 5), seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 2, 0);
        let x = symprune::verification::random_matrix(&mut rng, 3, w.rows());
        let y = symprune::verification::random_matrix(&mut rng, w.cols(), 4);
        let (j, k) = ((seed as usize) % w.rows(), (seed as usize / 7) % w.cols());
        let mut pruned = w.clone();
        pruned.set(j, k, 0.0);
        let g = sym_objective(&x, &y, &w, &pruned).unwrap().value;
        let s = w.get(j, k).abs() * (x.col_pnorm(NormOrder::Two)[j] + y.row_pnorm(NormOrder::Two)[k]);
        prop_assert!(deviation(g, s) <= 1e-9);
    }

    #[test]
    fn g_matrix_preserves_frobenius_norm(w in matrix(9, 9)) {
        prop_assert!(deviation(g_matrix(&w).frobenius(), w.frobenius()) <= 1e-9);
    }

    #[test]
    fn merged_stats_match_single_pass((x, split) in tokens_for(3).prop_flat_map(|x| { let t = x.rows(); (Just(x), 0..=t) })) {
        let top = DenseMatrix::from_fn(split, 3, |i, j| x.get(i, j));
        let bottom = DenseMatrix::from_fn(x.rows() - split, 3, |i, j| x.get(i + split, j));
        let merged = ActivationStats::compute(&top).merge(&ActivationStats::compute(&bottom)).unwrap();
        let whole = ActivationStats::compute(&x);
        prop_assert_eq!(merged.token_count(), whole.token_count());
        for (a, b) in [(merged.col_l2(), whole.col_l2()), (merged.mean(), whole.mean()), (merged.variance(), whole.variance())] {
            for (u, v) in a.iter().zip(b) {
                prop_assert!((u - v).abs() <= 1e-9 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn refinement_preserves_kept_counts(seed in any::<u64>(), b in 2usize..10, c in 1usize..10, variant in 0usize..3) {
        let mut rng = stream_rng(seed, 3, 0);
        let inst = support::refine_instance(&mut rng, b, c, 16);
        let config = match variant {
            0 => DsnotConfig::vanilla(),
            1 => DsnotConfig::default(),
            _ => DsnotConfig { relative_grow: true, relative_prune: false, gamma1: 0.05, max_cycles: 7, ..DsnotConfig::default() },
        };
        let out = finetune(&inst.w, &inst.mask, &inst.stats, &config).unwrap();
        for q in 0..c {
            prop_assert_eq!(out.mask.col_ones(q), inst.mask.col_ones(q));
        }
        prop_assert!(out.rows.iter().all(|r| r.cycles <= config.max_cycles));
        prop_assert!(out.report.max_error_drift <= 1e-9);
        prop_assert_eq!(out.mask.pattern(), inst.mask.pattern());
    }
}
