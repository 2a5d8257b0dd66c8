//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod support;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use symprune::dsnot::{finetune, finetune_sequential, DsnotConfig, DsnotVariant, FeatureNorms};
use symprune::masking::{build_nm_mask, build_unstructured_mask, ComparisonGroup, NmAxis};
use symprune::rng::stream_rng;
use symprune::scores::{score_general_sym, score_ria, score_stochria};
use symprune::verification::{
    random_mask, random_matrix, stripe_fixture, verify_g_identity_random, verify_general_diag,
    verify_lemma1, verify_lp, verify_oracle, verify_ria, verify_stochria_construction, verify_thm2,
    LpMode, Thm2Variant, VerificationOutcome, DEFAULT_TOLERANCE,
};
use symprune::{apply_mask, sym_objective, ActivationStats, DenseMatrix, NormOrder, ScoreMatrix};

const SEED: u64 = 20240917;

struct Line {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn from_outcome(name: &'static str, o: VerificationOutcome) -> Line {
    Line {
        name,
        passed: o.passed,
        detail: format!(
            "trials={} max_dev={:.3e} tol={:.0e}",
            o.trials, o.max_deviation, o.tolerance
        ),
    }
}

fn lemma1() -> Line {
    let start = Instant::now();
    let o = verify_lemma1(1000, 8, SEED, DEFAULT_TOLERANCE).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut line = from_outcome("lemma1_single_prune_identity", o);
    line.passed &= secs < 1.0;
    line.detail.push_str(&format!(" runtime={secs:.3}s"));
    line
}

fn thm2() -> Vec<Line> {
    vec![
        from_outcome(
            "thm2_v1_constant",
            verify_thm2(500, SEED, Thm2Variant::V1Constant).unwrap(),
        ),
        from_outcome(
            "thm2_v2_diagonal",
            verify_thm2(500, SEED, Thm2Variant::V2Diagonal).unwrap(),
        ),
    ]
}

fn constructions() -> Vec<Line> {
    vec![
        from_outcome("lemma_ria_construction", verify_ria(100, SEED).unwrap()),
        from_outcome(
            "lemma_general_diag",
            verify_general_diag(100, SEED).unwrap(),
        ),
        from_outcome(
            "lemma_lp_weight_proportional",
            verify_lp(100, SEED, LpMode::WeightProportional).unwrap(),
        ),
        from_outcome(
            "lemma_lp_unit_vector",
            verify_lp(100, SEED, LpMode::UnitVector).unwrap(),
        ),
        from_outcome(
            "lemma_stochria_construction",
            verify_stochria_construction(100, SEED).unwrap(),
        ),
    ]
}

fn g_identity() -> Line {
    from_outcome(
        "squared_objective_g_identity",
        verify_g_identity_random(100, SEED).unwrap(),
    )
}

fn oracle() -> Line {
    from_outcome(
        "oracle_single_prune_agreement",
        verify_oracle(200, SEED).unwrap(),
    )
}

fn stochria_degeneracy() -> Line {
    let mut mismatches = 0;
    for seed in 0..50u64 {
        let mut rng = stream_rng(SEED, 100, seed);
        let n = rng.gen_range(2..=24);
        let w = random_matrix(&mut rng, n, n);
        let x = random_matrix(&mut rng, 16, n);
        let stats = ActivationStats::compute(&x);
        let alpha = [0.0, 0.5, 1.0][seed as usize % 3];
        let stoch = score_stochria(&w, Some(&stats), alpha, 1.0, seed).unwrap();
        let ria = score_ria(&w, &stats, alpha, NormOrder::One).unwrap();
        let same = stoch
            .values()
            .iter()
            .zip(ria.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            mismatches += 1;
        }
    }
    Line {
        name: "stochria_full_support_equals_ria",
        passed: mismatches == 0,
        detail: format!("seeds=50 bitwise_mismatches={mismatches}"),
    }
}

fn coarse_scores(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> ScoreMatrix {
    // values on a coarse grid so ties are frequent
    let m = DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(0..200) as f64 / 64.0);
    ScoreMatrix::new(m).unwrap()
}

fn mask_structure() -> Line {
    let mut failures = Vec::new();
    let transforms: [fn(f64) -> f64; 3] = [f64::sqrt, |v| v * v * v, f64::ln_1p];
    for t in 0..100u64 {
        let mut rng = stream_rng(SEED, 200, t);
        let rows = 4 * rng.gen_range(1..=6);
        let cols = 4 * rng.gen_range(1..=6);
        let scores = coarse_scores(&mut rng, rows, cols);
        let eps = rng.gen_range(0.0..0.95);
        for group in [
            ComparisonGroup::PerLayer,
            ComparisonGroup::PerRow,
            ComparisonGroup::PerColumn,
        ] {
            let mask = build_unstructured_mask(&scores, eps, group).unwrap();
            for members in group.groups(rows, cols) {
                let zeros = members.iter().filter(|&&i| !mask.get_linear(i)).count();
                if zeros != (eps * members.len() as f64).floor() as usize {
                    failures.push(format!("trial {t} {group}: {zeros} zeros"));
                }
            }
            for f in transforms {
                let other = build_unstructured_mask(&scores.map(f).unwrap(), eps, group).unwrap();
                if other != mask {
                    failures.push(format!("trial {t} {group}: transform changed the mask"));
                }
            }
        }
        for (n, m) in [(1, 4), (2, 4), (3, 4), (1, 2)] {
            for axis in [NmAxis::InputDim, NmAxis::OutputDim] {
                let mask = build_nm_mask(&scores, n, m, axis).unwrap();
                for members in axis.groups(rows, cols, m).unwrap() {
                    let ones = members.iter().filter(|&&i| mask.get_linear(i)).count();
                    if ones != n {
                        failures.push(format!("trial {t} {n}:{m} {axis}: {ones} kept"));
                    }
                }
                for f in transforms {
                    if build_nm_mask(&scores.map(f).unwrap(), n, m, axis).unwrap() != mask {
                        failures.push(format!(
                            "trial {t} {n}:{m} {axis}: transform changed the mask"
                        ));
                    }
                }
            }
        }
    }
    Line {
        name: "mask_structure_and_monotone_invariance",
        passed: failures.is_empty(),
        detail: format!(
            "trials=100 violations={} {}",
            failures.len(),
            failures.first().cloned().unwrap_or_default()
        ),
    }
}

fn dsnot() -> Line {
    let mut failures = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut max_cycles_seen = 0;
    let mut total_swaps = 0;
    let vanilla = DsnotConfig::vanilla();
    let neutral_r2 = DsnotConfig {
        variant: DsnotVariant::R2,
        gamma1: 0.0,
        gamma2: 0.0,
        relative_grow: false,
        relative_prune: false,
        ..DsnotConfig::default()
    };
    for t in 0..100u64 {
        let mut rng = stream_rng(SEED, 300, t);
        let inst = support::refine_instance(&mut rng, 8, 16, 32);
        let (ref_keep, ref_swaps) = support::reference_vanilla(
            &inst.w,
            &inst.mask,
            &inst.stats,
            vanilla.alpha,
            vanilla.max_cycles,
            vanilla.update_threshold,
            vanilla.variance_floor,
        );
        for (label, cfg) in [("vanilla", &vanilla), ("r2_neutral", &neutral_r2)] {
            let out = finetune(&inst.w, &inst.mask, &inst.stats, cfg).unwrap();
            let swaps: Vec<Vec<(usize, usize)>> = out
                .rows
                .iter()
                .map(|r| r.swaps.iter().map(|s| (s.grow, s.prune)).collect())
                .collect();
            if out.mask.to_bools() != ref_keep || swaps != ref_swaps {
                failures.push(format!("trial {t}: {label} differs from the reference"));
            }
        }
        let mut relative = DsnotConfig::default();
        for cfg in [DsnotConfig::default(), {
            relative.relative_grow = true;
            relative.relative_prune = false;
            relative.gamma1 = 0.01;
            relative
        }] {
            let out = finetune(&inst.w, &inst.mask, &inst.stats, &cfg).unwrap();
            if out.mask.count_ones() != inst.mask.count_ones() {
                failures.push(format!("trial {t}: density changed"));
            }
            for q in 0..inst.w.cols() {
                if out.mask.col_ones(q) != inst.mask.col_ones(q) {
                    failures.push(format!("trial {t}: neuron {q} kept count changed"));
                }
            }
            if out.rows.iter().any(|r| r.cycles > cfg.max_cycles) {
                failures.push(format!("trial {t}: cycle limit exceeded"));
            }
            if out.feature_norms != FeatureNorms::compute(&inst.w, &out.mask) {
                let fresh = FeatureNorms::compute(&inst.w, &out.mask);
                let gap = fresh
                    .l1()
                    .iter()
                    .zip(out.feature_norms.l1())
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                    .fold(0.0, f64::max);
                if gap > 1e-9 {
                    failures.push(format!(
                        "trial {t}: feature norm bookkeeping off by {gap:e}"
                    ));
                }
            }
            let seq = finetune_sequential(&inst.w, &inst.mask, &inst.stats, &cfg).unwrap();
            if seq.mask != out.mask {
                failures.push(format!("trial {t}: scheduling changed the result"));
            }
            max_drift = max_drift.max(out.report.max_error_drift);
            max_cycles_seen =
                max_cycles_seen.max(out.rows.iter().map(|r| r.cycles).max().unwrap_or(0));
            total_swaps += out.report.total_swaps;
        }
    }
    if max_drift > 1e-9 {
        failures.push(format!("expected-error drift {max_drift:e}"));
    }
    Line {
        name: "dsnot_refinement_8x16",
        passed: failures.is_empty(),
        detail: format!(
            "trials=100 swaps={total_swaps} max_cycles={max_cycles_seen} max_error_drift={max_drift:.3e} violations={} {}",
            failures.len(),
            failures.first().cloned().unwrap_or_default()
        ),
    }
}

fn end_to_end() -> Line {
    let mut wins = 0;
    let mut ratio_sum = 0.0;
    for t in 0..50u64 {
        let fx = stripe_fixture(SEED + t, 64, 256);
        let stats = ActivationStats::compute(&fx.x);
        let y_norms = fx.y.row_pnorm(NormOrder::Two);
        let scores = score_general_sym(&fx.w, stats.col_l2(), &y_norms).unwrap();
        let mask = build_unstructured_mask(&scores, 0.5, ComparisonGroup::PerLayer).unwrap();
        let prune = mask.rows() * mask.cols() - mask.count_ones();
        let random = random_mask(&mut stream_rng(SEED, 400, t), 64, 64, prune).unwrap();
        let g_score = sym_objective(&fx.x, &fx.y, &fx.w, &apply_mask(&fx.w, &mask).unwrap())
            .unwrap()
            .value;
        let g_random = sym_objective(&fx.x, &fx.y, &fx.w, &apply_mask(&fx.w, &random).unwrap())
            .unwrap()
            .value;
        if g_score < g_random {
            wins += 1;
        }
        ratio_sum += g_score / g_random;
    }
    Line {
        name: "end_to_end_score_beats_random",
        passed: wins >= 45,
        detail: format!("wins={wins}/50 mean_g_ratio={:.4}", ratio_sum / 50.0),
    }
}

fn cli(args: &[&str], dir: &Path) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_symprune"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run symprune");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn strip_duration(manifest: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(manifest).unwrap();
    v.as_object_mut().unwrap().remove("duration_ms");
    v
}

fn reproducibility() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fx = stripe_fixture(SEED, 16, 64);
    fx.w.save(d.join("w.symw")).unwrap();
    fx.x.save(d.join("x.symw")).unwrap();
    fx.y.save(d.join("y.symw")).unwrap();
    let commands: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (
            vec!["stats", "--tokens", "x.symw", "--out", "s.syma"],
            vec!["s.syma"],
        ),
        (
            vec![
                "prune",
                "--weights",
                "w.symw",
                "--stats",
                "s.syma",
                "--method",
                "stochria",
                "--beta",
                "0.25",
                "--seed",
                "9",
                "--out",
                "m.symm",
                "--scores",
                "scores.symw",
            ],
            vec!["m.symm", "scores.symw"],
        ),
        (
            vec![
                "prune",
                "--weights",
                "w.symw",
                "--stats",
                "s.syma",
                "--pattern",
                "2:4",
                "--out",
                "nm.symm",
            ],
            vec!["nm.symm"],
        ),
        (
            vec![
                "eval",
                "--weights",
                "w.symw",
                "--mask",
                "m.symm",
                "--x",
                "x.symw",
                "--y",
                "y.symw",
                "--report",
                "e.json",
            ],
            vec!["e.json"],
        ),
        (
            vec![
                "finetune",
                "--weights",
                "w.symw",
                "--mask",
                "m.symm",
                "--stats",
                "s.syma",
                "--out",
                "f.symm",
                "--report",
                "f.json",
            ],
            vec!["f.symm", "f.json"],
        ),
        (
            vec![
                "sweep",
                "--weights",
                "w.symw",
                "--x",
                "x.symw",
                "--y",
                "y.symw",
                "--grid",
                "method=ria,stochria,magnitude;alpha=0.5,1;sparsity=0.5,2:4",
                "--seeds",
                "0,1",
                "--out",
                "sweep.csv",
            ],
            vec!["sweep.csv"],
        ),
        (
            vec!["verify", "--suite", "all", "--trials", "20", "--seed", "3"],
            vec![],
        ),
    ];
    let mut failures = Vec::new();
    for (args, outputs) in &commands {
        let (code1, stdout1) = cli(args, d);
        let first: Vec<Vec<u8>> = outputs
            .iter()
            .map(|o| std::fs::read(d.join(o)).unwrap_or_default())
            .collect();
        let manifest1 = outputs
            .first()
            .map(|o| std::fs::read(d.join(format!("{o}.manifest.json"))).unwrap());
        let (code2, stdout2) = cli(args, d);
        let second: Vec<Vec<u8>> = outputs
            .iter()
            .map(|o| std::fs::read(d.join(o)).unwrap_or_default())
            .collect();
        let manifest2 = outputs
            .first()
            .map(|o| std::fs::read(d.join(format!("{o}.manifest.json"))).unwrap());
        let name = args[0];
        if code1 != 0 || code2 != 0 {
            failures.push(format!("{name}: exit {code1}/{code2}"));
        }
        if stdout1 != stdout2 {
            failures.push(format!("{name}: stdout differs"));
        }
        if first != second || first.iter().any(|b| b.is_empty()) {
            failures.push(format!("{name}: outputs differ or are missing"));
        }
        if let (Some(a), Some(b)) = (manifest1, manifest2) {
            if strip_duration(&a) != strip_duration(&b) {
                failures.push(format!("{name}: manifests differ beyond duration"));
            }
        }
    }
    // thread count must not change results
    let run_with_threads = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_symprune"))
            .args([
                "sweep",
                "--weights",
                "w.symw",
                "--x",
                "x.symw",
                "--grid",
                "method=ria,wanda;sparsity=0.5,0.7",
                "--seeds",
                "0,1,2",
                "--out",
                "t.csv",
            ])
            .env("SYMPRUNE_THREADS", threads)
            .current_dir(d)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(d.join("t.csv")).unwrap()
    };
    if run_with_threads("1") != run_with_threads("4") {
        failures.push("sweep output depends on thread count".to_owned());
    }
    Line {
        name: "cli_reproducibility",
        passed: failures.is_empty(),
        detail: format!(
            "commands={} violations={} {}",
            commands.len() + 1,
            failures.len(),
            failures.join("; ")
        ),
    }
}

fn main() {
    let mut lines = vec![lemma1()];
    lines.extend(thm2());
    lines.extend(constructions());
    lines.push(g_identity());
    lines.push(oracle());
    lines.push(stochria_degeneracy());
    lines.push(mask_structure());
    lines.push(dsnot());
    lines.push(end_to_end());
    lines.push(reproducibility());

    println!();
    for l in &lines {
        println!(
            "ACCEPTANCE {:<40} {}  {}",
            l.name,
            if l.passed { "PASS" } else { "FAIL" },
            l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    println!(
        "ACCEPTANCE summary: {} criteria, {} failed",
        lines.len(),
        failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
