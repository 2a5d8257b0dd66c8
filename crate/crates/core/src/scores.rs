//! Weight-importance score matrices.
//!
//! Every score has the shape of the weight matrix it rates, is finite and
//! non-negative, and only its ordering matters: the lowest-scored weights are
//! the ones pruned. Weights are laid out `b x c` (input features by outputs),
//! so activation statistics index rows and output statistics index columns.
//!
//! Whenever a score divides by a row or column norm that is zero, the weight
//! being scored is itself zero and the entry is defined as 0.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::ActivationStats;
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, NormOrder, WeightMatrix};
use crate::rng::stream_rng;

/// Per-entry importance; same shape as the weights it was computed from.
#[derive(Clone, PartialEq)]
pub struct ScoreMatrix(DenseMatrix);

impl ScoreMatrix {
    pub fn new(values: DenseMatrix) -> Result<Self> {
        if values.values().iter().any(|&v| v < 0.0) {
            return Err(Error::config("scores must be non-negative"));
        }
        Ok(Self(values))
    }

    /// Wraps literal values; panics on negative entries.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        Self::new(DenseMatrix::from_rows(rows)).expect("negative score literal")
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.0
    }

    /// Elementwise transform, e.g. for invariance checks. `f` must keep
    /// entries finite and non-negative.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.0.map(f))
    }

    /// Linear index of the lowest score; ties go to the lowest index.
    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values().iter().enumerate() {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.0.save(path)
    }
}

impl fmt::Debug for ScoreMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScoreMatrix({:?})", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    Magnitude,
    Wanda,
    /// Output-side Wanda: magnitude times output activation norm.
    Owanda,
    Symmetric,
    GeneralSym,
    Lp,
    Ria,
    Stochria,
    Strategy,
}

impl ScoreMethod {
    pub const ALL: [ScoreMethod; 9] = [
        ScoreMethod::Magnitude,
        ScoreMethod::Wanda,
        ScoreMethod::Owanda,
        ScoreMethod::Symmetric,
        ScoreMethod::GeneralSym,
        ScoreMethod::Lp,
        ScoreMethod::Ria,
        ScoreMethod::Stochria,
        ScoreMethod::Strategy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreMethod::Magnitude => "magnitude",
            ScoreMethod::Wanda => "wanda",
            ScoreMethod::Owanda => "owanda",
            ScoreMethod::Symmetric => "symmetric",
            ScoreMethod::GeneralSym => "general_sym",
            ScoreMethod::Lp => "lp",
            ScoreMethod::Ria => "ria",
            ScoreMethod::Stochria => "stochria",
            ScoreMethod::Strategy => "strategy",
        }
    }

    /// Whether the method needs input activation statistics under `config`.
    pub fn needs_stats(self, alpha: f64) -> bool {
        match self {
            ScoreMethod::Wanda | ScoreMethod::GeneralSym => true,
            ScoreMethod::Ria | ScoreMethod::Stochria => alpha > 0.0,
            _ => false,
        }
    }

    pub fn needs_output_norms(self) -> bool {
        matches!(self, ScoreMethod::Owanda)
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        ScoreMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown score method `{s}`")))
    }
}

/// Reweighting strategies for the ℓp family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Strategy {
    /// `|W| (1/‖row‖ + 1/‖col‖)`
    #[default]
    S1,
    /// `|W| / (‖row‖ + ‖col‖)`
    S2,
    /// `|W| (‖row‖ + ‖col‖)`
    S3,
    /// `|W| / (1/‖row‖ + 1/‖col‖)`
    S4,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(Strategy::S1),
            "S2" => Ok(Strategy::S2),
            "S3" => Ok(Strategy::S3),
            "S4" => Ok(Strategy::S4),
            other => Err(Error::config(format!("unknown strategy `{other}`"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// How the self-calibrated symmetric score combines row and column ℓ2 norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetricVariant {
    /// `|W| (‖row‖₂ + ‖col‖₂)`
    SumNorm,
    /// `|W| √(‖row‖₂² + ‖col‖₂²)`
    #[default]
    RootSumSquare,
}

impl FromStr for SymmetricVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "sum_norm" => Ok(SymmetricVariant::SumNorm),
            "root_sum_square" | "rss" => Ok(SymmetricVariant::RootSumSquare),
            other => Err(Error::config(format!(
                "unknown symmetric variant `{other}`"
            ))),
        }
    }
}

impl fmt::Display for SymmetricVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymmetricVariant::SumNorm => "sum_norm",
            SymmetricVariant::RootSumSquare => "root_sum_square",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub method: ScoreMethod,
    /// Exponent on the input activation norm.
    pub alpha: f64,
    pub p: NormOrder,
    /// Fraction of `min(b, c)` sampled per row/column by StochRIA.
    pub beta: f64,
    pub seed: u64,
    pub strategy: Strategy,
    pub symmetric_variant: SymmetricVariant,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            method: ScoreMethod::Ria,
            alpha: 0.5,
            p: NormOrder::One,
            beta: 0.1,
            seed: 0,
            strategy: Strategy::S1,
            symmetric_variant: SymmetricVariant::RootSumSquare,
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::config(format!(
                "beta must lie in (0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Calibration quantities a score may draw on.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreInputs<'a> {
    /// Input activation statistics, one entry per weight row.
    pub stats: Option<&'a ActivationStats>,
    /// Output activation norms `‖Y_k:‖₂`, one entry per weight column.
    pub output_norms: Option<&'a [f64]>,
}

/// Dispatches on `config.method`.
pub fn compute_scores(
    w: &WeightMatrix,
    inputs: ScoreInputs<'_>,
    config: &ScoreConfig,
) -> Result<ScoreMatrix> {
    config.validate()?;
    let need_stats = || {
        inputs.stats.ok_or_else(|| {
            Error::config(format!(
                "method `{}` requires activation statistics",
                config.method
            ))
        })
    };
    match config.method {
        ScoreMethod::Magnitude => Ok(score_magnitude(w)),
        ScoreMethod::Wanda => score_wanda(w, need_stats()?, config.alpha),
        ScoreMethod::Owanda => {
            let y = inputs
                .output_norms
                .ok_or_else(|| Error::config("method `owanda` requires output activation norms"))?;
            score_owanda(w, y)
        }
        ScoreMethod::Symmetric => Ok(score_symmetric(w, config.symmetric_variant)),
        ScoreMethod::GeneralSym => {
            let x = need_stats()?.col_l2();
            let zeros;
            let y = match inputs.output_norms {
                Some(y) => y,
                None => {
                    zeros = vec![0.0; w.cols()];
                    &zeros
                }
            };
            score_general_sym(w, x, y)
        }
        ScoreMethod::Lp => Ok(score_lp(w, config.p)),
        ScoreMethod::Ria => match inputs.stats {
            Some(s) => score_ria(w, s, config.alpha, config.p),
            None if config.alpha == 0.0 => Ok(score_lp(w, config.p)),
            None => Err(need_stats().unwrap_err()),
        },
        ScoreMethod::Stochria => {
            let stats = if config.alpha > 0.0 {
                Some(need_stats()?)
            } else {
                inputs.stats
            };
            score_stochria(w, stats, config.alpha, config.beta, config.seed)
        }
        ScoreMethod::Strategy => Ok(score_strategy(w, config.p, config.strategy)),
    }
}

/// Mean StochRIA score over `trials` consecutive seeds starting at `seed`.
pub fn score_stochria_mean(
    w: &WeightMatrix,
    stats: Option<&ActivationStats>,
    alpha: f64,
    beta: f64,
    seed: u64,
    trials: usize,
) -> Result<ScoreMatrix> {
    if trials == 0 {
        return Err(Error::config("trial count must be at least 1"));
    }
    let mut acc = vec![0.0; w.len()];
    for t in 0..trials as u64 {
        let s = score_stochria(w, stats, alpha, beta, seed.wrapping_add(t))?;
        for (a, v) in acc.iter_mut().zip(s.values()) {
            *a += v;
        }
    }
    let n = trials as f64;
    ScoreMatrix::new(DenseMatrix::new(
        w.rows(),
        w.cols(),
        acc.into_iter().map(|a| a / n).collect(),
    )?)
}

pub fn score_magnitude(w: &WeightMatrix) -> ScoreMatrix {
    ScoreMatrix(w.map(f64::abs))
}

/// `|W_jk| (x_j + y_k)` for arbitrary non-negative per-row and per-column norms.
pub fn score_general_sym(
    w: &WeightMatrix,
    x_col_norms: &[f64],
    y_row_norms: &[f64],
) -> Result<ScoreMatrix> {
    check_len("input norms", x_col_norms.len(), w.rows())?;
    check_len("output norms", y_row_norms.len(), w.cols())?;
    check_non_negative(x_col_norms.iter().chain(y_row_norms))?;
    Ok(ScoreMatrix(DenseMatrix::from_fn(
        w.rows(),
        w.cols(),
        |j, k| w.get(j, k).abs() * (x_col_norms[j] + y_row_norms[k]),
    )))
}

pub fn score_wanda(w: &WeightMatrix, stats: &ActivationStats, alpha: f64) -> Result<ScoreMatrix> {
    let factors = activation_factors(w, stats, alpha)?;
    Ok(ScoreMatrix(DenseMatrix::from_fn(
        w.rows(),
        w.cols(),
        |j, k| w.get(j, k).abs() * factors[j],
    )))
}

pub fn score_owanda(w: &WeightMatrix, y_row_norms: &[f64]) -> Result<ScoreMatrix> {
    check_len("output norms", y_row_norms.len(), w.cols())?;
    check_non_negative(y_row_norms.iter())?;
    Ok(ScoreMatrix(DenseMatrix::from_fn(
        w.rows(),
        w.cols(),
        |j, k| w.get(j, k).abs() * y_row_norms[k],
    )))
}

pub fn score_symmetric(w: &WeightMatrix, variant: SymmetricVariant) -> ScoreMatrix {
    let row_sq: Vec<f64> = (0..w.rows())
        .map(|j| w.row(j).iter().map(|v| v * v).sum())
        .collect();
    let col_sq: Vec<f64> = (0..w.cols())
        .map(|k| w.col(k).map(|v| v * v).sum())
        .collect();
    ScoreMatrix(DenseMatrix::from_fn(w.rows(), w.cols(), |j, k| {
        let a = w.get(j, k).abs();
        match variant {
            SymmetricVariant::SumNorm => a * (row_sq[j].sqrt() + col_sq[k].sqrt()),
            SymmetricVariant::RootSumSquare => a * (row_sq[j] + col_sq[k]).sqrt(),
        }
    }))
}

/// Relative importance under an ℓp norm: `|W_jk| (‖W_j:‖p⁻¹ + ‖W_:k‖p⁻¹)`.
pub fn score_lp(w: &WeightMatrix, p: NormOrder) -> ScoreMatrix {
    score_strategy(w, p, Strategy::S1)
}

/// ℓp relative importance scaled per row by `‖X_:j‖₂^α`.
pub fn score_ria(
    w: &WeightMatrix,
    stats: &ActivationStats,
    alpha: f64,
    p: NormOrder,
) -> Result<ScoreMatrix> {
    let factors = activation_factors(w, stats, alpha)?;
    let rows = w.row_pnorm(p);
    let cols = w.col_pnorm(p);
    Ok(ScoreMatrix(DenseMatrix::from_fn(
        w.rows(),
        w.cols(),
        |j, k| relative_importance(w.get(j, k), rows[j], cols[k]) * factors[j],
    )))
}

/// Subset size `τ = max(1, ⌊β·min(b, c)⌋)`.
pub fn stochria_tau(rows: usize, cols: usize, beta: f64) -> usize {
    ((beta * rows.min(cols) as f64).floor() as usize).max(1)
}

/// Sampled index sets: one subset of column indices per row and one subset of
/// row indices per column, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochSamples {
    pub row_samples: Vec<Vec<usize>>,
    pub col_samples: Vec<Vec<usize>>,
}

const AXIS_ROW: u64 = 0;
const AXIS_COL: u64 = 1;

/// Draws the StochRIA index sets. Each row's (column's) subset depends only
/// on `(seed, axis, index)`, never on evaluation order.
pub fn stochria_samples(rows: usize, cols: usize, beta: f64, seed: u64) -> Result<StochSamples> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::config(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    let tau = stochria_tau(rows, cols, beta);
    let draw = |axis: u64, i: usize, len: usize| -> Vec<usize> {
        let amount = tau.min(len);
        if amount == len {
            return (0..len).collect();
        }
        let mut rng: ChaCha8Rng = stream_rng(seed, axis, i as u64);
        let mut picked = index::sample(&mut rng, len, amount).into_vec();
        picked.sort_unstable();
        picked
    };
    Ok(StochSamples {
        row_samples: (0..rows).map(|j| draw(AXIS_ROW, j, cols)).collect(),
        col_samples: (0..cols).map(|k| draw(AXIS_COL, k, rows)).collect(),
    })
}

/// StochRIA with freshly drawn index sets.
pub fn score_stochria(
    w: &WeightMatrix,
    stats: Option<&ActivationStats>,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<ScoreMatrix> {
    let samples = stochria_samples(w.rows(), w.cols(), beta, seed)?;
    score_stochria_with_samples(w, &samples, stats, alpha)
}

/// StochRIA on caller-supplied index sets.
pub fn score_stochria_with_samples(
    w: &WeightMatrix,
    samples: &StochSamples,
    stats: Option<&ActivationStats>,
    alpha: f64,
) -> Result<ScoreMatrix> {
    check_len("row samples", samples.row_samples.len(), w.rows())?;
    check_len("column samples", samples.col_samples.len(), w.cols())?;
    let in_range = samples.row_samples.iter().flatten().all(|&k| k < w.cols())
        && samples.col_samples.iter().flatten().all(|&j| j < w.rows());
    if !in_range {
        return Err(Error::dim("sampled index out of range"));
    }
    let factors = match stats {
        Some(s) => Some(activation_factors(w, s, alpha)?),
        None => None,
    };
    let rows: Vec<f64> = samples
        .row_samples
        .iter()
        .enumerate()
        .map(|(j, idx)| NormOrder::One.norm(idx.iter().map(|&k| w.get(j, k))))
        .collect();
    let cols: Vec<f64> = samples
        .col_samples
        .iter()
        .enumerate()
        .map(|(k, idx)| NormOrder::One.norm(idx.iter().map(|&j| w.get(j, k))))
        .collect();
    Ok(ScoreMatrix(DenseMatrix::from_fn(
        w.rows(),
        w.cols(),
        |j, k| {
            let ri = relative_importance(w.get(j, k), rows[j], cols[k]);
            match &factors {
                Some(f) => ri * f[j],
                None => ri,
            }
        },
    )))
}

pub fn score_strategy(w: &WeightMatrix, p: NormOrder, strategy: Strategy) -> ScoreMatrix {
    let rows = w.row_pnorm(p);
    let cols = w.col_pnorm(p);
    ScoreMatrix(DenseMatrix::from_fn(w.rows(), w.cols(), |j, k| {
        let wjk = w.get(j, k);
        let (r, c) = (rows[j], cols[k]);
        match strategy {
            Strategy::S1 => relative_importance(wjk, r, c),
            _ if wjk == 0.0 => 0.0,
            Strategy::S2 => guarded(wjk.abs() / (r + c)),
            Strategy::S3 => wjk.abs() * (r + c),
            Strategy::S4 => guarded(wjk.abs() / (recip(r) + recip(c))),
        }
    }))
}

/// `|w| (1/r + 1/c)`, with zero for zero weights.
#[inline]
fn relative_importance(w: f64, row_norm: f64, col_norm: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    guarded(w.abs() * (recip(row_norm) + recip(col_norm)))
}

#[inline]
fn recip(n: f64) -> f64 {
    if n > 0.0 {
        1.0 / n
    } else {
        0.0
    }
}

#[inline]
fn guarded(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

fn activation_factors(w: &WeightMatrix, stats: &ActivationStats, alpha: f64) -> Result<Vec<f64>> {
    check_len("activation statistics", stats.feature_count(), w.rows())?;
    Ok(stats.col_l2().iter().map(|n| n.powf(alpha)).collect())
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::dim(format!(
            "{what}: expected length {want}, got {got}"
        )));
    }
    Ok(())
}

fn check_non_negative<'a>(mut xs: impl Iterator<Item = &'a f64>) -> Result<()> {
    if xs.any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::config(
            "norm vectors must be finite and non-negative",
        ));
    }
    Ok(())
}
