//! Training-free prune-and-grow refinement of a sparse mask.
//!
//! Each output neuron is refined independently by swapping one pruned weight
//! back in ("grow") against one kept weight ("prune"), steered by the expected
//! reconstruction error of that neuron,
//!
//! ```text
//! E[ε_q] = Σ_{r pruned} W_qr · E[X_r]
//! ```
//!
//! Weights are stored `b x c` (inputs by outputs), so the refiner's row `q` is
//! column `q` of the weight matrix and its positions `r` are input features,
//! matching the indexing of [`ActivationStats`]. Both the vanilla criterion
//! and the relative/regularized variant are implemented; the latter scales the
//! grow and/or prune criterion by
//!
//! ```text
//! D_qr = 1/‖kept weights of neuron q‖₁ + 1/‖kept weights of feature r‖₁
//! ```
//!
//! and adds `γ·‖kept weights of neuron q‖_p`. A zero kept norm contributes 0
//! to `D`.
//!
//! Swaps preserve the number of kept weights of every neuron, so the global
//! density of the mask never changes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::ActivationStats;
use crate::error::{Error, Result};
use crate::masking::{MaskPattern, NmAxis, SparsityMask};
use crate::matrix::{NormOrder, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsnotVariant {
    Vanilla,
    #[default]
    R2,
}

impl FromStr for DsnotVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vanilla" => Ok(DsnotVariant::Vanilla),
            "r2" => Ok(DsnotVariant::R2),
            other => Err(Error::config(format!("unknown refiner variant `{other}`"))),
        }
    }
}

impl fmt::Display for DsnotVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DsnotVariant::Vanilla => "vanilla",
            DsnotVariant::R2 => "r2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsnotConfig {
    pub variant: DsnotVariant,
    pub max_cycles: usize,
    /// A neuron stops once `|E[ε_q]|` drops below this level.
    pub update_threshold: f64,
    /// Grow-phase regularization weight.
    pub gamma1: f64,
    /// Prune-phase regularization weight.
    pub gamma2: f64,
    /// Norm of the regularizer.
    pub reg_p: NormOrder,
    /// Exponent on the activation norm in the prune criterion.
    pub alpha: f64,
    pub relative_grow: bool,
    pub relative_prune: bool,
    pub variance_floor: f64,
}

impl Default for DsnotConfig {
    fn default() -> Self {
        Self {
            variant: DsnotVariant::R2,
            max_cycles: 50,
            update_threshold: 0.1,
            gamma1: 0.0,
            gamma2: 0.001,
            reg_p: NormOrder::Two,
            alpha: 0.5,
            relative_grow: false,
            relative_prune: true,
            variance_floor: 1e-12,
        }
    }
}

impl DsnotConfig {
    /// The classic criterion: no reweighting, no regularizer.
    pub fn vanilla() -> Self {
        Self {
            variant: DsnotVariant::Vanilla,
            gamma1: 0.0,
            gamma2: 0.0,
            relative_grow: false,
            relative_prune: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_cycles == 0 {
            return Err(Error::config("max_cycles must be at least 1"));
        }
        let non_negative = [
            ("update_threshold", self.update_threshold),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("alpha", self.alpha),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::config("variance_floor must be positive"));
        }
        Ok(())
    }

    /// Non-fatal configuration concerns.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.variant == DsnotVariant::R2 && self.relative_grow && self.relative_prune {
            out.push("relative reweighting enabled in both grow and prune phases".to_owned());
        }
        if self.variant == DsnotVariant::Vanilla
            && (self.relative_grow
                || self.relative_prune
                || self.gamma1 != 0.0
                || self.gamma2 != 0.0)
        {
            out.push("vanilla variant ignores relative flags and gamma terms".to_owned());
        }
        out
    }

    fn grow_relative(&self) -> bool {
        self.variant == DsnotVariant::R2 && self.relative_grow
    }

    fn prune_relative(&self) -> bool {
        self.variant == DsnotVariant::R2 && self.relative_prune
    }

    fn gammas(&self) -> (f64, f64) {
        match self.variant {
            DsnotVariant::R2 => (self.gamma1, self.gamma2),
            DsnotVariant::Vanilla => (0.0, 0.0),
        }
    }

    /// Whether neurons are coupled through the shared feature norms.
    pub fn couples_rows(&self) -> bool {
        self.grow_relative() || self.prune_relative()
    }
}

/// `Σ_{r pruned} W_qr · mean_r`.
pub fn expected_row_error(
    dense_row: &[f64],
    keep_row: &[bool],
    stats: &ActivationStats,
) -> Result<f64> {
    if dense_row.len() != stats.feature_count() || keep_row.len() != dense_row.len() {
        return Err(Error::dim(format!(
            "row of length {} with {} mask bits against {} features",
            dense_row.len(),
            keep_row.len(),
            stats.feature_count()
        )));
    }
    Ok(pruned_error(dense_row, keep_row, stats.mean()))
}

fn pruned_error(dense: &[f64], keep: &[bool], mean: &[f64]) -> f64 {
    let mut e = 0.0;
    for r in 0..dense.len() {
        if !keep[r] {
            e += dense[r] * mean[r];
        }
    }
    e
}

fn kept_l1(dense: &[f64], keep: &[bool]) -> f64 {
    let mut s = 0.0;
    for r in 0..dense.len() {
        if keep[r] {
            s += dense[r].abs();
        }
    }
    s
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
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// ℓ1 norms of kept weights per input feature, across all neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorms {
    l1: Vec<f64>,
    kept: Vec<usize>,
}

impl FeatureNorms {
    pub fn compute(w: &WeightMatrix, mask: &SparsityMask) -> Self {
        let mut l1 = vec![0.0; w.rows()];
        let mut kept = vec![0; w.rows()];
        for r in 0..w.rows() {
            for q in 0..w.cols() {
                if mask.get(r, q) {
                    l1[r] += w.get(r, q).abs();
                    kept[r] += 1;
                }
            }
        }
        Self { l1, kept }
    }

    pub fn l1(&self) -> &[f64] {
        &self.l1
    }

    fn add(&mut self, r: usize, w: f64) {
        self.l1[r] += w.abs();
        self.kept[r] += 1;
    }

    fn remove(&mut self, r: usize, w: f64) {
        self.kept[r] -= 1;
        self.l1[r] = if self.kept[r] == 0 {
            0.0
        } else {
            (self.l1[r] - w.abs()).max(0.0)
        };
    }
}

/// Mutable refinement state of one neuron.
#[derive(Debug, Clone)]
pub struct RowState<'a> {
    row: usize,
    dense: &'a [f64],
    keep: Vec<bool>,
    expected_error: f64,
    kept_l1: f64,
    stats: &'a ActivationStats,
    /// Swaps are confined to aligned blocks of this many positions.
    block: Option<usize>,
}

impl<'a> RowState<'a> {
    pub fn new(
        row: usize,
        dense: &'a [f64],
        keep: Vec<bool>,
        stats: &'a ActivationStats,
    ) -> Result<Self> {
        let expected_error = expected_row_error(dense, &keep, stats)?;
        let kept_l1 = kept_l1(dense, &keep);
        Ok(Self {
            row,
            dense,
            keep,
            expected_error,
            kept_l1,
            stats,
            block: None,
        })
    }

    /// Confines swaps to aligned blocks of `m` consecutive positions.
    pub fn with_block(mut self, m: usize) -> Result<Self> {
        if m == 0 || !self.dense.len().is_multiple_of(m) {
            return Err(Error::config(format!(
                "row length {} not divisible by block size {m}",
                self.dense.len()
            )));
        }
        self.block = Some(m);
        Ok(self)
    }

    pub fn row(&self) -> usize {
        self.row
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    /// Cached, incrementally maintained `E[ε_q]`.
    pub fn expected_error(&self) -> f64 {
        self.expected_error
    }

    fn relative_factor(&self, r: usize, features: &FeatureNorms) -> f64 {
        recip(self.kept_l1) + recip(features.l1[r])
    }

    fn regularizer(&self, p: NormOrder) -> f64 {
        p.norm(
            (0..self.dense.len())
                .filter(|&r| self.keep[r])
                .map(|r| self.dense[r]),
        )
    }

    fn same_block(&self, a: usize, b: usize) -> bool {
        self.block.is_none_or(|m| a / m == b / m)
    }
}

/// Pruned position whose restoration best reduces the expected error.
pub fn grow_index(
    state: &RowState<'_>,
    features: &FeatureNorms,
    config: &DsnotConfig,
) -> Option<usize> {
    let s = sign(state.expected_error);
    let mean = state.stats.mean();
    let var = state.stats.variance();
    let (gamma1, _) = config.gammas();
    let reg = if gamma1 != 0.0 {
        gamma1 * state.regularizer(config.reg_p)
    } else {
        0.0
    };
    let mut best: Option<(usize, f64)> = None;
    for r in 0..state.dense.len() {
        if state.keep[r] {
            continue;
        }
        let mut v = state.dense[r];
        if config.grow_relative() {
            v *= state.relative_factor(r, features);
        }
        let value = s * v * mean[r] / var[r].max(config.variance_floor) + reg;
        if best.is_none_or(|(_, b)| value > b) {
            best = Some((r, value));
        }
    }
    best.map(|(r, _)| r)
}

/// Kept position (other than `grown`) whose removal pushes the expected error
/// back toward zero at the lowest cost. `state` must already hold `grown` as
/// kept; the error sign is taken from the cached pre-grow error.
pub fn prune_index(
    state: &RowState<'_>,
    grown: usize,
    features: &FeatureNorms,
    config: &DsnotConfig,
) -> Option<usize> {
    debug_assert!(state.keep[grown]);
    let s = sign(state.expected_error);
    let mean = state.stats.mean();
    let act = state.stats.col_l2();
    let (_, gamma2) = config.gammas();
    let reg = if gamma2 != 0.0 {
        gamma2 * state.regularizer(config.reg_p)
    } else {
        0.0
    };
    let mut best: Option<(usize, f64)> = None;
    for r in 0..state.dense.len() {
        if !state.keep[r] || r == grown || !state.same_block(r, grown) {
            continue;
        }
        let w = state.dense[r];
        let d = if config.prune_relative() {
            state.relative_factor(r, features)
        } else {
            1.0
        };
        let delta = s * (w * d * mean[r]);
        if delta >= 0.0 || delta.is_nan() {
            continue;
        }
        let value = w.abs() * act[r].powf(config.alpha) * d + reg;
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((r, value));
        }
    }
    best.map(|(r, _)| r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swap {
    pub grow: usize,
    pub prune: usize,
}

/// What happened to one neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowOutcome {
    pub row: usize,
    pub cycles: usize,
    pub swaps: Vec<Swap>,
    pub error_before: f64,
    pub error_after: f64,
    /// Largest gap seen between the cached error and a from-scratch recount.
    pub max_error_drift: f64,
}

/// Runs prune-and-grow cycles on one neuron until the expected error is
/// below threshold, no move is available, or `max_cycles` swaps were made.
pub fn finetune_row(
    state: &mut RowState<'_>,
    features: &mut FeatureNorms,
    config: &DsnotConfig,
) -> RowOutcome {
    let mean = state.stats.mean();
    let error_before = state.expected_error;
    let mut swaps = Vec::new();
    let mut max_error_drift: f64 = 0.0;
    while swaps.len() < config.max_cycles {
        if state.expected_error.abs() < config.update_threshold {
            break;
        }
        let Some(g) = grow_index(state, features, config) else {
            break;
        };
        let wg = state.dense[g];
        state.keep[g] = true;
        let l1_before = state.kept_l1;
        state.kept_l1 = kept_l1(state.dense, &state.keep);
        let Some(p) = prune_index(state, g, features, config) else {
            state.keep[g] = false;
            state.kept_l1 = l1_before;
            break;
        };
        let wp = state.dense[p];
        state.keep[p] = false;
        state.kept_l1 = kept_l1(state.dense, &state.keep);
        state.expected_error = state.expected_error - wg * mean[g] + wp * mean[p];
        features.add(g, wg);
        features.remove(p, wp);
        let fresh = pruned_error(state.dense, &state.keep, mean);
        max_error_drift = max_error_drift.max((fresh - state.expected_error).abs());
        swaps.push(Swap { grow: g, prune: p });
    }
    RowOutcome {
        row: state.row,
        cycles: swaps.len(),
        swaps,
        error_before,
        error_after: state.expected_error,
        max_error_drift,
    }
}

/// Summary written next to a refined mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    pub schema: u32,
    pub rows: usize,
    pub total_swaps: usize,
    /// Swap count -> number of neurons.
    pub cycles_histogram: BTreeMap<usize, usize>,
    pub sum_abs_expected_error_before: f64,
    pub sum_abs_expected_error_after: f64,
    pub max_error_drift: f64,
    pub density: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub mask: SparsityMask,
    pub report: FinetuneReport,
    pub rows: Vec<RowOutcome>,
    /// Feature norms after the last neuron was processed.
    pub feature_norms: FeatureNorms,
}

/// Refines every neuron of `mask` in index order.
///
/// Neurons are independent unless relative reweighting is enabled, in which
/// case they share the per-feature kept norms and are processed sequentially;
/// otherwise they are refined in parallel with identical results.
pub fn finetune(
    w: &WeightMatrix,
    mask: &SparsityMask,
    stats: &ActivationStats,
    config: &DsnotConfig,
) -> Result<FinetuneOutcome> {
    run(w, mask, stats, config, !config.couples_rows())
}

/// [`finetune`] without any parallelism.
pub fn finetune_sequential(
    w: &WeightMatrix,
    mask: &SparsityMask,
    stats: &ActivationStats,
    config: &DsnotConfig,
) -> Result<FinetuneOutcome> {
    run(w, mask, stats, config, false)
}

fn run(
    w: &WeightMatrix,
    mask: &SparsityMask,
    stats: &ActivationStats,
    config: &DsnotConfig,
    parallel: bool,
) -> Result<FinetuneOutcome> {
    config.validate()?;
    if w.shape() != mask.shape() {
        return Err(Error::dim(format!(
            "weights {:?} vs mask {:?}",
            w.shape(),
            mask.shape()
        )));
    }
    if stats.feature_count() != w.rows() {
        return Err(Error::dim(format!(
            "{} activation features for {} weight rows",
            stats.feature_count(),
            w.rows()
        )));
    }
    let block =
        match mask.pattern() {
            MaskPattern::Nm {
                m,
                axis: NmAxis::InputDim,
                ..
            } => Some(m as usize),
            MaskPattern::Nm {
                axis: NmAxis::OutputDim,
                ..
            } => return Err(Error::config(
                "refining an N:M mask grouped along the output dimension would break its groups",
            )),
            MaskPattern::Unstructured { .. } => None,
        };

    // neuron-major copies: one contiguous vector per output
    let neurons: Vec<Vec<f64>> = (0..w.cols()).map(|q| w.col(q).collect()).collect();
    let keeps: Vec<Vec<bool>> = (0..w.cols())
        .map(|q| (0..w.rows()).map(|r| mask.get(r, q)).collect())
        .collect();
    let mut features = FeatureNorms::compute(w, mask);

    let refine = |q: usize,
                  keep: Vec<bool>,
                  features: &mut FeatureNorms|
     -> Result<(Vec<bool>, RowOutcome)> {
        let mut state = RowState::new(q, &neurons[q], keep, stats)?;
        if let Some(m) = block {
            state = state.with_block(m)?;
        }
        let outcome = finetune_row(&mut state, features, config);
        Ok((state.keep, outcome))
    };

    let results: Vec<(Vec<bool>, RowOutcome)> = if parallel {
        let snapshot = features.clone();
        keeps
            .into_par_iter()
            .enumerate()
            .map(|(q, keep)| {
                let mut local = snapshot.clone();
                refine(q, keep, &mut local)
            })
            .collect::<Result<_>>()?
    } else {
        let mut out = Vec::with_capacity(keeps.len());
        for (q, keep) in keeps.into_iter().enumerate() {
            out.push(refine(q, keep, &mut features)?);
        }
        out
    };

    let mut new_mask = mask.clone();
    let mut rows = Vec::with_capacity(results.len());
    for (q, (keep, outcome)) in results.into_iter().enumerate() {
        for (r, k) in keep.into_iter().enumerate() {
            new_mask.set(r, q, k);
        }
        rows.push(outcome);
    }
    if parallel {
        features = FeatureNorms::compute(w, &new_mask);
    }

    let mut cycles_histogram = BTreeMap::new();
    for r in &rows {
        *cycles_histogram.entry(r.cycles).or_insert(0) += 1;
    }
    let report = FinetuneReport {
        schema: 1,
        rows: rows.len(),
        total_swaps: rows.iter().map(|r| r.cycles).sum(),
        cycles_histogram,
        sum_abs_expected_error_before: rows.iter().map(|r| r.error_before.abs()).sum(),
        sum_abs_expected_error_after: rows.iter().map(|r| r.error_after.abs()).sum(),
        max_error_drift: rows.iter().map(|r| r.max_error_drift).fold(0.0, f64::max),
        density: crate::masking::mask_density(&new_mask),
    };
    Ok(FinetuneOutcome {
        mask: new_mask,
        report,
        rows,
        feature_norms: features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;

    fn running_stats() -> ActivationStats {
        ActivationStats::from_parts(
            10,
            vec![1.0, 2.0, 0.5],
            vec![0.5, 1.0, -0.2],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap()
    }

    const DENSE: [f64; 3] = [1.0, -2.0, 3.0];

    fn no_features() -> FeatureNorms {
        FeatureNorms {
            l1: vec![1.0; 3],
            kept: vec![1; 3],
        }
    }

    #[test]
    fn expected_error_cases() {
        let s = running_stats();
        assert_eq!(
            expected_row_error(&DENSE, &[true, false, true], &s).unwrap(),
            -2.0
        );
        assert_eq!(expected_row_error(&DENSE, &[true; 3], &s).unwrap(), 0.0);
        let centered =
            ActivationStats::from_parts(1, vec![1.0; 3], vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(
            expected_row_error(&DENSE, &[false; 3], &centered).unwrap(),
            0.0
        );
        assert!(expected_row_error(&DENSE[..2], &[true, true], &s).is_err());
    }

    #[test]
    fn grow_running_example() {
        let s = running_stats();
        let state = RowState::new(0, &DENSE, vec![true, false, true], &s).unwrap();
        assert_eq!(
            grow_index(&state, &no_features(), &DsnotConfig::vanilla()),
            Some(1)
        );
    }

    #[test]
    fn grow_picks_largest_and_breaks_ties_low() {
        // E = 1*1 + 1*1 = 2 > 0; values 1*1/var: [2/1? ...]
        let stats =
            ActivationStats::from_parts(4, vec![1.0; 3], vec![1.0, 1.0, 0.0], vec![0.5, 0.2, 1.0])
                .unwrap();
        let dense = [1.0, 1.0, 4.0];
        let state = RowState::new(0, &dense, vec![false, false, true], &stats).unwrap();
        // candidate values: 1/0.5 = 2, 1/0.2 = 5
        assert_eq!(
            grow_index(&state, &no_features(), &DsnotConfig::vanilla()),
            Some(1)
        );

        let zero_mean =
            ActivationStats::from_parts(4, vec![1.0; 3], vec![0.0; 3], vec![1.0; 3]).unwrap();
        let state = RowState::new(0, &dense, vec![true, false, false], &zero_mean).unwrap();
        assert_eq!(
            grow_index(&state, &no_features(), &DsnotConfig::vanilla()),
            Some(1)
        );
    }

    #[test]
    fn prune_running_example() {
        let s = running_stats();
        let mut state = RowState::new(0, &DENSE, vec![true, false, true], &s).unwrap();
        state.keep[1] = true;
        assert_eq!(
            prune_index(&state, 1, &no_features(), &DsnotConfig::vanilla()),
            Some(0)
        );
    }

    #[test]
    fn prune_empty_candidate_set() {
        // E < 0 requires w*mean > 0 for a candidate; all kept have w*mean <= 0
        let stats = ActivationStats::from_parts(4, vec![1.0; 3], vec![1.0, 1.0, 1.0], vec![1.0; 3])
            .unwrap();
        let dense = [-1.0, -2.0, -3.0];
        let mut state = RowState::new(0, &dense, vec![true, false, true], &stats).unwrap();
        assert!(state.expected_error < 0.0);
        state.keep[1] = true;
        assert_eq!(
            prune_index(&state, 1, &no_features(), &DsnotConfig::vanilla()),
            None
        );
    }

    #[test]
    fn prune_picks_smallest_criterion() {
        // E = -1 (pruned r=0 contributes -1*1); candidates need w*mean > 0
        let stats =
            ActivationStats::from_parts(4, vec![1.0, 1.0, 1.0, 1.0], vec![1.0; 4], vec![1.0; 4])
                .unwrap();
        let dense = [-1.0, 0.3, 0.1, -5.0];
        let mut state = RowState::new(0, &dense, vec![false, true, true, true], &stats).unwrap();
        state.keep[0] = true;
        let cfg = DsnotConfig {
            alpha: 1.0,
            ..DsnotConfig::vanilla()
        };
        assert_eq!(prune_index(&state, 0, &no_features(), &cfg), Some(2));
    }

    #[test]
    fn finetune_row_running_example() {
        let s = running_stats();
        let mut state = RowState::new(0, &DENSE, vec![true, false, true], &s).unwrap();
        let cfg = DsnotConfig {
            max_cycles: 1,
            ..DsnotConfig::vanilla()
        };
        let mut f = no_features();
        let out = finetune_row(&mut state, &mut f, &cfg);
        assert_eq!(out.cycles, 1);
        assert_eq!(out.swaps, vec![Swap { grow: 1, prune: 0 }]);
        assert_eq!(state.keep(), &[false, true, true]);
        assert_eq!(state.expected_error(), 0.5);
    }

    #[test]
    fn finetune_row_threshold_and_zero_row() {
        let s = running_stats();
        let dense = [0.05, 0.0, 0.0];
        let mut state = RowState::new(0, &dense, vec![false, true, true], &s).unwrap();
        let out = finetune_row(&mut state, &mut no_features(), &DsnotConfig::default());
        assert_eq!(out.cycles, 0);
        assert_eq!(state.keep(), &[false, true, true]);

        let zeros = [0.0; 3];
        let mut state = RowState::new(0, &zeros, vec![false, true, false], &s).unwrap();
        let out = finetune_row(&mut state, &mut no_features(), &DsnotConfig::default());
        assert_eq!(out.cycles, 0);
    }

    #[test]
    fn finetune_row_respects_cycle_limit() {
        let s = running_stats();
        let mut state = RowState::new(0, &DENSE, vec![true, false, true], &s).unwrap();
        let cfg = DsnotConfig {
            max_cycles: 7,
            update_threshold: 0.0,
            ..DsnotConfig::vanilla()
        };
        let out = finetune_row(&mut state, &mut no_features(), &cfg);
        assert!(out.cycles <= 7);
        assert_eq!(state.keep().iter().filter(|&&k| k).count(), 2);
    }

    #[test]
    fn finetune_full_mask_is_unchanged() {
        let w = DenseMatrix::from_rows(&[[1.0, -2.0], [3.0, 4.0], [0.5, 0.1]]);
        let stats = running_stats();
        let mask = SparsityMask::ones(3, 2, MaskPattern::Unstructured { epsilon: 0.0 });
        let out = finetune(&w, &mask, &stats, &DsnotConfig::default()).unwrap();
        assert_eq!(out.mask, mask);
        assert_eq!(out.report.total_swaps, 0);
    }

    #[test]
    fn finetune_rejects_bad_shapes_and_config() {
        let w = DenseMatrix::from_rows(&[[1.0, -2.0], [3.0, 4.0]]);
        let mask = SparsityMask::ones(2, 2, MaskPattern::Unstructured { epsilon: 0.0 });
        assert!(finetune(&w, &mask, &running_stats(), &DsnotConfig::default()).is_err());
        let stats = ActivationStats::empty(2);
        let cfg = DsnotConfig {
            max_cycles: 0,
            ..Default::default()
        };
        assert!(finetune(&w, &mask, &stats, &cfg).is_err());
        let nm = SparsityMask::ones(
            2,
            2,
            MaskPattern::Nm {
                n: 1,
                m: 2,
                axis: NmAxis::OutputDim,
            },
        );
        assert!(finetune(&w, &nm, &stats, &DsnotConfig::default()).is_err());
    }

    #[test]
    fn warnings() {
        let cfg = DsnotConfig {
            relative_grow: true,
            ..Default::default()
        };
        assert_eq!(cfg.warnings().len(), 1);
        assert!(DsnotConfig::default().warnings().is_empty());
    }
}
