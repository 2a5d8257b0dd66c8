//! Numeric certification of the score identities and a brute-force pruning
//! oracle for tiny instances.
//!
//! Every check draws its random instances from per-trial streams
//! `stream_rng(seed, axis, trial)`, so trials run in parallel and a report is
//! reproducible from `(seed, trials)` alone.
//!
//! Deviations are measured as `|actual − reference| / max(|reference|, 1e-3)`
//! against a tolerance of `1e-9`: relative for ordinary magnitudes, and an
//! absolute `1e-12` when the reference is zero.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::{MaskPattern, SparsityMask};
use crate::matrix::{DenseMatrix, NormOrder, WeightMatrix};
use crate::reconstruction::{evaluate, sym_objective, Objective};
use crate::rng::stream_rng;
use crate::scores::score_general_sym;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Largest `b·c` accepted by [`brute_force_prune`].
pub const BRUTE_FORCE_LIMIT: usize = 20;

const FLOOR: f64 = 1e-3;

const GAP_LIMIT: usize = 12;

/// `|actual − reference| / max(|reference|, 1e-3)`.
pub fn deviation(actual: f64, reference: f64) -> f64 {
    let d = (actual - reference).abs() / reference.abs().max(FLOOR);
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub name: String,
    pub trials: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl VerificationOutcome {
    pub fn new(name: impl Into<String>, trials: usize, max_deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            trials,
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }

    fn from_trials(name: &str, deviations: Vec<f64>, tolerance: f64) -> Self {
        let trials = deviations.len();
        let max = deviations.into_iter().fold(0.0, f64::max);
        Self::new(name, trials, max, tolerance)
    }
}

impl fmt::Display for VerificationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<24} trials={:<5} max_dev={:.3e} tol={:.0e} {}",
            self.name,
            self.trials,
            self.max_deviation,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

// ---------------------------------------------------------------------------
// fixtures

/// Standard-normal entries.
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Standard-normal entries with roughly `zero_prob` of them forced to zero.
pub fn random_sparse_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    zero_prob: f64,
) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let v: f64 = rng.sample(StandardNormal);
        if rng.gen_bool(zero_prob) {
            0.0
        } else {
            v
        }
    })
}

/// A uniformly random mask with exactly `prune` zeros.
pub fn random_mask(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    prune: usize,
) -> Result<SparsityMask> {
    let total = rows * cols;
    if prune > total {
        return Err(Error::config(format!(
            "cannot prune {prune} of {total} entries"
        )));
    }
    let epsilon = if total == 0 {
        0.0
    } else {
        prune as f32 / total as f32
    };
    let mut mask = SparsityMask::ones(rows, cols, MaskPattern::Unstructured { epsilon });
    for i in index::sample(rng, total, prune) {
        mask.set_linear(i, false);
    }
    Ok(mask)
}

/// Weights, input calibration and output calibration of one synthetic layer.
#[derive(Debug, Clone)]
pub struct LayerFixture {
    pub w: WeightMatrix,
    pub x: DenseMatrix,
    pub y: DenseMatrix,
}

/// A `dim x dim` layer whose columns carry very different scales (a few
/// "stripe" columns dominate), with `tokens x dim` input activations that
/// have per-feature scales and offsets, and `dim x tokens` output-side
/// calibration.
pub fn stripe_fixture(seed: u64, dim: usize, tokens: usize) -> LayerFixture {
    let mut rng = stream_rng(seed, 0x5354, 0);
    let col_scale: Vec<f64> = (0..dim)
        .map(|_| {
            if rng.gen_bool(0.125) {
                rng.gen_range(4.0..10.0)
            } else {
                rng.gen_range(0.2..1.0)
            }
        })
        .collect();
    let row_scale: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..1.5)).collect();
    let w = DenseMatrix::from_fn(dim, dim, |j, k| {
        let z: f64 = rng.sample(StandardNormal);
        z * col_scale[k] * row_scale[j]
    });
    let feat_scale: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..3.0)).collect();
    let feat_shift: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let x = DenseMatrix::from_fn(tokens, dim, |_, j| {
        let z: f64 = rng.sample(StandardNormal);
        z * feat_scale[j] + feat_shift[j]
    });
    let out_scale: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.1..3.0)).collect();
    let y = DenseMatrix::from_fn(dim, tokens, |k, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * out_scale[k]
    });
    LayerFixture { w, x, y }
}

// ---------------------------------------------------------------------------
// single-prune identity

fn col_l2(m: &DenseMatrix) -> Vec<f64> {
    m.col_pnorm(NormOrder::Two)
}

fn row_l2(m: &DenseMatrix) -> Vec<f64> {
    m.row_pnorm(NormOrder::Two)
}

fn lemma1_trial(rng: &mut ChaCha8Rng, max_dim: usize) -> Result<f64> {
    let mut dim = || rng.gen_range(1..=max_dim);
    let (a, b, c, d) = (dim(), dim(), dim(), dim());
    let x = random_matrix(rng, a, b);
    let y = random_matrix(rng, c, d);
    let w = random_sparse_matrix(rng, b, c, 0.05);
    let (j, k) = (rng.gen_range(0..b), rng.gen_range(0..c));
    let mut pruned = w.clone();
    pruned.set(j, k, 0.0);
    let g = sym_objective(&x, &y, &w, &pruned)?.value;
    let s = w.get(j, k).abs() * (col_l2(&x)[j] + row_l2(&y)[k]);
    Ok(deviation(g, s))
}

/// Pruning a single entry `(j, k)` costs exactly `|W_jk|(‖X_:j‖₂ + ‖Y_k:‖₂)`
/// under the symmetric objective.
pub fn verify_lemma1(
    trials: usize,
    max_dim: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationOutcome> {
    if max_dim == 0 {
        return Err(Error::config("max_dim must be at least 1"));
    }
    let devs = (0..trials)
        .into_par_iter()
        .map(|t| lemma1_trial(&mut stream_rng(seed, 1, t as u64), max_dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationOutcome::from_trials(
        "lemma1_single_prune",
        devs,
        tol,
    ))
}

// ---------------------------------------------------------------------------
// relative-importance constructions

fn reciprocal_l1(w: &WeightMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = w.row_pnorm(NormOrder::One);
    let cols = w.col_pnorm(NormOrder::One);
    if let Some(j) = rows.iter().position(|&n| n == 0.0) {
        return Err(Error::degenerate(format!("row {j} has zero l1 norm")));
    }
    if let Some(k) = cols.iter().position(|&n| n == 0.0) {
        return Err(Error::degenerate(format!("column {k} has zero l1 norm")));
    }
    Ok((
        rows.iter().map(|n| 1.0 / n).collect(),
        cols.iter().map(|n| 1.0 / n).collect(),
    ))
}

/// `α_jk = ‖W_j:‖₁⁻¹ + ‖W_:k‖₁⁻¹`.
pub fn relative_targets(w: &WeightMatrix) -> Result<DenseMatrix> {
    let (r, c) = reciprocal_l1(w)?;
    Ok(DenseMatrix::from_fn(w.rows(), w.cols(), |j, k| r[j] + c[k]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thm2Variant {
    V1Constant,
    V2Diagonal,
}

/// Calibration matrices `X ∈ ℝ^{b×b}`, `Y ∈ ℝ^{c×c}` whose norms reproduce
/// relative importance: `‖X_:j‖₂ + ‖Y_k:‖₂ = α_jk`.
pub fn construct_thm2(
    w: &WeightMatrix,
    variant: Thm2Variant,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (r, c) = reciprocal_l1(w)?;
    let (b, cc) = w.shape();
    Ok(match variant {
        Thm2Variant::V1Constant => {
            let sb = (b as f64).sqrt();
            let sc = (cc as f64).sqrt();
            (
                DenseMatrix::from_fn(b, b, |_, j| r[j] / sb),
                DenseMatrix::from_fn(cc, cc, |k, _| c[k] / sc),
            )
        }
        Thm2Variant::V2Diagonal => (DenseMatrix::diagonal(&r), DenseMatrix::diagonal(&c)),
    })
}

/// Largest deviation between `‖X_:j‖₂ + ‖Y_k:‖₂` and `α_jk` over all entries.
pub fn thm2_deviation(w: &WeightMatrix, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    let targets = relative_targets(w)?;
    let xn = col_l2(x);
    let yn = row_l2(y);
    if xn.len() != w.rows() || yn.len() != w.cols() {
        return Err(Error::dim("calibration shapes do not match the weights"));
    }
    let mut max: f64 = 0.0;
    for (j, xj) in xn.iter().enumerate() {
        for (k, yk) in yn.iter().enumerate() {
            max = max.max(deviation(xj + yk, targets.get(j, k)));
        }
    }
    Ok(max)
}

/// Single-entry matrices `A ∈ ℝ^{b×b}`, `B ∈ ℝ^{c×c}` with
/// `A_{j,p} = ‖C_:j‖₂^α/‖W_j:‖₁` and `B_{s,k} = ‖C_:j‖₂^α/‖W_:k‖₁`, so that
/// `‖A_j:‖₂ + ‖B_:k‖₂ = α_jk·‖C_:j‖₂^α`.
#[allow(clippy::too_many_arguments)]
pub fn construct_ria(
    w: &WeightMatrix,
    c: &DenseMatrix,
    alpha: f64,
    j: usize,
    k: usize,
    p_col: usize,
    s_row: usize,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (b, cc) = w.shape();
    if c.cols() != b {
        return Err(Error::dim(format!(
            "calibration has {} features for {b} weight rows",
            c.cols()
        )));
    }
    if j >= b || k >= cc || p_col >= b || s_row >= cc {
        return Err(Error::dim("construction index out of range"));
    }
    let row = NormOrder::One.norm(w.row(j).iter().copied());
    let col = NormOrder::One.norm(w.col(k));
    if row == 0.0 || col == 0.0 {
        return Err(Error::degenerate(format!("zero l1 norm at ({j}, {k})")));
    }
    let act = NormOrder::Two.norm(c.col(j)).powf(alpha);
    let mut a = DenseMatrix::zeros(b, b);
    a.set(j, p_col, act / row);
    let mut bm = DenseMatrix::zeros(cc, cc);
    bm.set(s_row, k, act / col);
    Ok((a, bm))
}

/// Checks `‖(A·D_X)_:j‖₂ + ‖(D_Y·B)_k:‖₂ = ‖A_:j‖₂/‖W_j:‖₁ + ‖B_k:‖₂/‖W_:k‖₁`
/// for all `(j, k)`, where `D_X`, `D_Y` hold the reciprocal row and column ℓ1
/// norms of `W`. Returns the largest deviation.
pub fn construct_general_diag(a: &DenseMatrix, b: &DenseMatrix, w: &WeightMatrix) -> Result<f64> {
    if a.cols() != w.rows() || b.rows() != w.cols() {
        return Err(Error::dim(format!(
            "A {:?} and B {:?} against W {:?}",
            a.shape(),
            b.shape(),
            w.shape()
        )));
    }
    let (r, c) = reciprocal_l1(w)?;
    let ax = a.matmul(&DenseMatrix::diagonal(&r))?;
    let yb = DenseMatrix::diagonal(&c).matmul(b)?;
    let (lhs_x, lhs_y) = (col_l2(&ax), row_l2(&yb));
    let (an, bn) = (col_l2(a), row_l2(b));
    let mut max: f64 = 0.0;
    for j in 0..w.rows() {
        for k in 0..w.cols() {
            let reference = an[j] * r[j] + bn[k] * c[k];
            max = max.max(deviation(lhs_x[j] + lhs_y[k], reference));
        }
    }
    Ok(max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpMode {
    WeightProportional,
    UnitVector,
}

fn check_unit(u: &[f64]) -> Result<()> {
    let n = NormOrder::Two.norm(u.iter().copied());
    if u.is_empty() || (n - 1.0).abs() > 1e-12 {
        return Err(Error::config(format!(
            "expected a unit vector, got l2 norm {n}"
        )));
    }
    Ok(())
}

/// Calibration with `‖X_:j‖₂ = ‖W_j:‖p⁻¹` and `‖Y_k:‖₂ = ‖W_:k‖p⁻¹`.
///
/// In weight-proportional mode `X_:j = W_j:ᵀ/(‖W_j:‖p‖W_j:‖₂)` (so `X` is
/// `c x b`) and `Y_k: = W_:kᵀ/(‖W_:k‖p‖W_:k‖₂)` (`Y` is `c x b`). In
/// unit-vector mode every column of `X` is a scaled copy of `u` and every row
/// of `Y` a scaled copy of `v`.
pub fn construct_lp(
    w: &WeightMatrix,
    p: NormOrder,
    mode: LpMode,
    u: Option<&[f64]>,
    v: Option<&[f64]>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (b, c) = w.shape();
    let rows_p = w.row_pnorm(p);
    let cols_p = w.col_pnorm(p);
    if rows_p
        .iter()
        .chain(&cols_p)
        .any(|&n| n <= 0.0 || n.is_nan())
    {
        return Err(Error::degenerate(format!("zero {p}-norm row or column")));
    }
    match mode {
        LpMode::WeightProportional => {
            let rows_2 = w.row_pnorm(NormOrder::Two);
            let cols_2 = w.col_pnorm(NormOrder::Two);
            let x = DenseMatrix::from_fn(c, b, |i, j| w.get(j, i) / (rows_p[j] * rows_2[j]));
            let y = DenseMatrix::from_fn(c, b, |k, i| w.get(i, k) / (cols_p[k] * cols_2[k]));
            Ok((x, y))
        }
        LpMode::UnitVector => {
            let (u, v) = match (u, v) {
                (Some(u), Some(v)) => (u, v),
                _ => return Err(Error::config("unit-vector mode needs both u and v")),
            };
            check_unit(u)?;
            check_unit(v)?;
            let x = DenseMatrix::from_fn(u.len(), b, |i, j| u[i] / rows_p[j]);
            let y = DenseMatrix::from_fn(c, v.len(), |k, i| v[i] / cols_p[k]);
            Ok((x, y))
        }
    }
}

/// Largest deviation of `‖X_:j‖₂` from `‖W_j:‖p⁻¹` and of `‖Y_k:‖₂` from
/// `‖W_:k‖p⁻¹`.
pub fn lp_deviation(w: &WeightMatrix, p: NormOrder, x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    let rows_p = w.row_pnorm(p);
    let cols_p = w.col_pnorm(p);
    let xs = col_l2(x).into_iter().zip(&rows_p);
    let ys = row_l2(y).into_iter().zip(&cols_p);
    xs.chain(ys)
        .map(|(got, n)| deviation(got, 1.0 / n))
        .fold(0.0, f64::max)
}

fn sampled_l1(values: impl Iterator<Item = f64>, name: &str) -> Result<f64> {
    let n = NormOrder::One.norm(values);
    if n == 0.0 {
        return Err(Error::degenerate(format!(
            "sampled {name} has zero l1 norm"
        )));
    }
    Ok(n)
}

fn check_subset(set: &[usize], tau: usize, len: usize) -> Result<()> {
    if tau == 0 || set.len() != tau {
        return Err(Error::config(format!(
            "index set of size {} for tau = {tau}",
            set.len()
        )));
    }
    if set.iter().any(|&i| i >= len) || !set.iter().all_unique() {
        return Err(Error::config(
            "index set has duplicates or out-of-range entries",
        ));
    }
    Ok(())
}

/// Indicator vectors over the sampled index sets, scaled so that
/// `‖X_:j‖₂ = ‖W_{j,S_j}‖₁⁻¹` (`X_:j` has length `c`) and
/// `‖Y_k:‖₂ = ‖W_{S_k,k}‖₁⁻¹` (`Y_k:` has length `b`).
pub fn construct_stochria(
    w: &WeightMatrix,
    j: usize,
    s_j: &[usize],
    k: usize,
    s_k: &[usize],
    tau: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (b, c) = w.shape();
    if j >= b || k >= c {
        return Err(Error::dim("construction index out of range"));
    }
    check_subset(s_j, tau, c)?;
    check_subset(s_k, tau, b)?;
    let rn = sampled_l1(s_j.iter().map(|&i| w.get(j, i)), "row")?;
    let cn = sampled_l1(s_k.iter().map(|&i| w.get(i, k)), "column")?;
    let st = (tau as f64).sqrt();
    let mut x = vec![0.0; c];
    for &i in s_j {
        x[i] = 1.0 / (rn * st);
    }
    let mut y = vec![0.0; b];
    for &i in s_k {
        y[i] = 1.0 / (cn * st);
    }
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// squared-objective identity

/// `G_jk = √((‖W_j:‖₂² + ‖W_:k‖₂²)/(b + c))`.
pub fn g_matrix(w: &WeightMatrix) -> DenseMatrix {
    let (b, c) = w.shape();
    let row_sq: Vec<f64> = (0..b)
        .map(|j| w.row(j).iter().map(|v| v * v).sum())
        .collect();
    let col_sq: Vec<f64> = (0..c).map(|k| w.col(k).map(|v| v * v).sum()).collect();
    let denom = (b + c) as f64;
    DenseMatrix::from_fn(b, c, |j, k| ((row_sq[j] + col_sq[k]) / denom).sqrt())
}

/// `‖G‖_F = ‖W‖_F`.
pub fn verify_g_identity(w: &WeightMatrix) -> VerificationOutcome {
    let dev = deviation(g_matrix(w).frobenius(), w.frobenius());
    VerificationOutcome::new("g_identity", 1, dev, DEFAULT_TOLERANCE)
}

// ---------------------------------------------------------------------------
// brute-force oracle

/// Exhaustive minimizer of the symmetric objective over every mask pruning
/// exactly `k` entries. Pruned-index sets are enumerated in lexicographic
/// order and only a strictly smaller objective replaces the incumbent, so
/// ties resolve to the lexicographically smallest set.
pub fn brute_force_prune(
    x: &DenseMatrix,
    y: &DenseMatrix,
    w: &WeightMatrix,
    k: usize,
) -> Result<(SparsityMask, f64)> {
    let total = w.len();
    if total > BRUTE_FORCE_LIMIT {
        return Err(Error::config(format!(
            "brute force limited to {BRUTE_FORCE_LIMIT} entries, got {total}"
        )));
    }
    if k > total {
        return Err(Error::config(format!(
            "cannot prune {k} of {total} entries"
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for set in (0..total).combinations(k) {
        let mut values = w.values().to_vec();
        for &i in &set {
            values[i] = 0.0;
        }
        let pruned = WeightMatrix::new(w.rows(), w.cols(), values)?;
        let g = evaluate(Objective::Sym, Some(x), Some(y), w, &pruned)?.value;
        if best.as_ref().is_none_or(|(_, b)| g < *b) {
            best = Some((set, g));
        }
    }
    let (set, g) = best.expect("at least one combination");
    let epsilon = if total == 0 {
        0.0
    } else {
        k as f32 / total as f32
    };
    let mut mask = SparsityMask::ones(w.rows(), w.cols(), MaskPattern::Unstructured { epsilon });
    for i in set {
        mask.set_linear(i, false);
    }
    Ok((mask, g))
}

fn oracle_instance(rng: &mut ChaCha8Rng, limit: usize) -> (DenseMatrix, DenseMatrix, WeightMatrix) {
    let (b, c) = loop {
        let b = rng.gen_range(1..=5);
        let c = rng.gen_range(1..=5);
        if b * c <= limit {
            break (b, c);
        }
    };
    let a = rng.gen_range(1..=6);
    let d = rng.gen_range(1..=6);
    let x = random_matrix(rng, a, b);
    let y = random_matrix(rng, c, d);
    let w = random_sparse_matrix(rng, b, c, 0.1);
    (x, y, w)
}

/// Single-prune oracle agreement: the brute-force choice must equal the
/// lowest general-symmetric score (ties to the lowest linear index). The
/// deviation of a trial is 1 on disagreement and 0 otherwise.
pub fn verify_oracle(trials: usize, seed: u64) -> Result<VerificationOutcome> {
    let devs = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (x, y, w) = oracle_instance(&mut stream_rng(seed, 20, t as u64), BRUTE_FORCE_LIMIT);
            let (mask, _) = brute_force_prune(&x, &y, &w, 1)?;
            let chosen = (0..w.len()).find(|&i| !mask.get_linear(i));
            let scores = score_general_sym(&w, &col_l2(&x), &row_l2(&y))?;
            Ok(if chosen == scores.argmin() { 0.0 } else { 1.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationOutcome::from_trials(
        "oracle_single_prune",
        devs,
        0.0,
    ))
}

/// How far greedy score-based masks land from the brute-force optimum when
/// more than one entry is pruned. Reported, never asserted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyGap {
    pub trials: usize,
    pub optimal_hits: usize,
    pub mean_relative_gap: f64,
    pub max_relative_gap: f64,
}

/// Instances are kept to `b·c ≤ 12` so every `k` enumerates quickly.
pub fn greedy_gap(trials: usize, seed: u64) -> Result<GreedyGap> {
    let gaps = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, 21, t as u64);
            let (x, y, w) = oracle_instance(&mut rng, GAP_LIMIT);
            let k = rng.gen_range(1..=w.len());
            let (_, best) = brute_force_prune(&x, &y, &w, k)?;
            let scores = score_general_sym(&w, &col_l2(&x), &row_l2(&y))?;
            let mut order: Vec<usize> = (0..w.len()).collect();
            order.sort_by(|&a, &b| {
                scores.values()[a]
                    .total_cmp(&scores.values()[b])
                    .then(a.cmp(&b))
            });
            let mut values = w.values().to_vec();
            for &i in &order[..k] {
                values[i] = 0.0;
            }
            let pruned = WeightMatrix::new(w.rows(), w.cols(), values)?;
            let greedy = sym_objective(&x, &y, &w, &pruned)?.value;
            Ok(if best > 0.0 {
                (greedy - best) / best
            } else {
                greedy
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = gaps.len().max(1) as f64;
    Ok(GreedyGap {
        trials: gaps.len(),
        optimal_hits: gaps.iter().filter(|&&g| g <= 1e-12).count(),
        mean_relative_gap: gaps.iter().sum::<f64>() / n,
        max_relative_gap: gaps.iter().copied().fold(0.0, f64::max),
    })
}

// ---------------------------------------------------------------------------
// randomized checks

fn random_dims(rng: &mut ChaCha8Rng, max: usize) -> (usize, usize) {
    (rng.gen_range(1..=max), rng.gen_range(1..=max))
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let n = NormOrder::Two.norm(v.iter().copied());
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn run_trials(
    name: &str,
    trials: usize,
    seed: u64,
    axis: u64,
    tol: f64,
    trial: impl Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
) -> Result<VerificationOutcome> {
    let devs = (0..trials)
        .into_par_iter()
        .map(|t| trial(&mut stream_rng(seed, axis, t as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationOutcome::from_trials(name, devs, tol))
}

pub fn verify_thm2(trials: usize, seed: u64, variant: Thm2Variant) -> Result<VerificationOutcome> {
    let (name, axis) = match variant {
        Thm2Variant::V1Constant => ("thm2_v1_constant", 2),
        Thm2Variant::V2Diagonal => ("thm2_v2_diagonal", 3),
    };
    run_trials(name, trials, seed, axis, DEFAULT_TOLERANCE, |rng| {
        let (b, c) = random_dims(rng, 8);
        let w = random_matrix(rng, b, c);
        let (x, y) = construct_thm2(&w, variant)?;
        thm2_deviation(&w, &x, &y)
    })
}

pub fn verify_ria(trials: usize, seed: u64) -> Result<VerificationOutcome> {
    run_trials("lemma_ria", trials, seed, 4, DEFAULT_TOLERANCE, |rng| {
        let (b, c) = random_dims(rng, 6);
        let w = random_matrix(rng, b, c);
        let tokens = rng.gen_range(1..=8);
        let cal = random_matrix(rng, tokens, b);
        let alpha = rng.gen_range(0.0..2.0);
        let (j, k) = (rng.gen_range(0..b), rng.gen_range(0..c));
        let (p, s) = (rng.gen_range(0..b), rng.gen_range(0..c));
        let (a, bm) = construct_ria(&w, &cal, alpha, j, k, p, s)?;
        let got = NormOrder::Two.norm(a.row(j).iter().copied()) + NormOrder::Two.norm(bm.col(k));
        let reference =
            relative_targets(&w)?.get(j, k) * NormOrder::Two.norm(cal.col(j)).powf(alpha);
        Ok(deviation(got, reference))
    })
}

pub fn verify_general_diag(trials: usize, seed: u64) -> Result<VerificationOutcome> {
    run_trials(
        "lemma_general_diag",
        trials,
        seed,
        5,
        DEFAULT_TOLERANCE,
        |rng| {
            let (b, c) = random_dims(rng, 6);
            let w = random_matrix(rng, b, c);
            let (a_rows, b_cols) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
            let a = random_matrix(rng, a_rows, b);
            let bm = random_matrix(rng, c, b_cols);
            construct_general_diag(&a, &bm, &w)
        },
    )
}

fn random_norm_order(rng: &mut ChaCha8Rng) -> NormOrder {
    NormOrder::ALL[rng.gen_range(0..NormOrder::ALL.len())]
}

pub fn verify_lp(trials: usize, seed: u64, mode: LpMode) -> Result<VerificationOutcome> {
    let (name, axis) = match mode {
        LpMode::WeightProportional => ("lemma_lp_weight", 6),
        LpMode::UnitVector => ("lemma_lp_unit_vector", 7),
    };
    run_trials(name, trials, seed, axis, DEFAULT_TOLERANCE, |rng| {
        let (b, c) = random_dims(rng, 6);
        let w = random_matrix(rng, b, c);
        let p = random_norm_order(rng);
        let (x, y) = match mode {
            LpMode::WeightProportional => construct_lp(&w, p, mode, None, None)?,
            LpMode::UnitVector => {
                let (lu, lv) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
                let u = random_unit(rng, lu);
                let v = random_unit(rng, lv);
                construct_lp(&w, p, mode, Some(&u), Some(&v))?
            }
        };
        Ok(lp_deviation(&w, p, &x, &y))
    })
}

pub fn verify_stochria_construction(trials: usize, seed: u64) -> Result<VerificationOutcome> {
    run_trials(
        "lemma_stochria",
        trials,
        seed,
        8,
        DEFAULT_TOLERANCE,
        |rng| {
            let (b, c) = random_dims(rng, 8);
            let w = random_matrix(rng, b, c);
            let tau = rng.gen_range(1..=b.min(c));
            let (j, k) = (rng.gen_range(0..b), rng.gen_range(0..c));
            let s_j = index::sample(rng, c, tau).into_vec();
            let s_k = index::sample(rng, b, tau).into_vec();
            let (x, y) = construct_stochria(&w, j, &s_j, k, &s_k, tau)?;
            let rn = NormOrder::One.norm(s_j.iter().map(|&i| w.get(j, i)));
            let cn = NormOrder::One.norm(s_k.iter().map(|&i| w.get(i, k)));
            let dx = deviation(NormOrder::Two.norm(x), 1.0 / rn);
            let dy = deviation(NormOrder::Two.norm(y), 1.0 / cn);
            Ok(dx.max(dy))
        },
    )
}

pub fn verify_g_identity_random(trials: usize, seed: u64) -> Result<VerificationOutcome> {
    run_trials(
        "squared_objective_g_identity",
        trials,
        seed,
        9,
        DEFAULT_TOLERANCE,
        |rng| {
            let (b, c) = random_dims(rng, 12);
            let w = random_matrix(rng, b, c);
            Ok(verify_g_identity(&w).max_deviation)
        },
    )
}

// ---------------------------------------------------------------------------
// suites

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemmas,
    Oracle,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lemmas" => Ok(Suite::Lemmas),
            "oracle" => Ok(Suite::Oracle),
            "all" => Ok(Suite::All),
            other => Err(Error::config(format!(
                "unknown verification suite `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Lemmas => "lemmas",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        })
    }
}

/// Runs every check of `suite` with `trials` random instances each.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<Vec<VerificationOutcome>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Lemmas | Suite::All) {
        out.push(verify_lemma1(trials, 8, seed, DEFAULT_TOLERANCE)?);
        out.push(verify_thm2(trials, seed, Thm2Variant::V1Constant)?);
        out.push(verify_thm2(trials, seed, Thm2Variant::V2Diagonal)?);
        out.push(verify_ria(trials, seed)?);
        out.push(verify_general_diag(trials, seed)?);
        out.push(verify_lp(trials, seed, LpMode::WeightProportional)?);
        out.push(verify_lp(trials, seed, LpMode::UnitVector)?);
        out.push(verify_stochria_construction(trials, seed)?);
        out.push(verify_g_identity_random(trials, seed)?);
    }
    if matches!(suite, Suite::Oracle | Suite::All) {
        out.push(verify_oracle(trials, seed)?);
    }
    Ok(out)
}
