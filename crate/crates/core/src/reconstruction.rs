//! Reconstruction objectives for a pruned weight matrix `W̃` against `W`.
//!
//! With `Δ = W̃ − W`, `X ∈ ℝ^{a×b}` the input calibration and `Y ∈ ℝ^{c×d}`
//! the output calibration:
//!
//! * `inprecon`  = ‖XΔ‖²_F
//! * `sym`       = ‖XΔ‖_F + ‖ΔY‖_F
//! * `sym_squared` = ‖XΔ‖²_F + ‖ΔY‖²_F

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Inprecon,
    #[default]
    Sym,
    SymSquared,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "inprecon" => Ok(Objective::Inprecon),
            "sym" => Ok(Objective::Sym),
            "sym_squared" => Ok(Objective::SymSquared),
            other => Err(Error::config(format!("unknown objective `{other}`"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Inprecon => "inprecon",
            Objective::Sym => "sym",
            Objective::SymSquared => "sym_squared",
        })
    }
}

/// An objective value with its input-side and output-side parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub objective: Objective,
    pub value: f64,
    pub input_term: f64,
    pub output_term: f64,
}

impl ObjectiveReport {
    /// `key=value` lines, one per field.
    pub fn to_text(&self) -> String {
        format!(
            "objective={}\nvalue={}\ninput_term={}\noutput_term={}\n",
            self.objective, self.value, self.input_term, self.output_term
        )
    }
}

fn delta(w: &WeightMatrix, pruned: &WeightMatrix) -> Result<DenseMatrix> {
    if w.shape() != pruned.shape() {
        return Err(Error::dim(format!(
            "dense weights {:?} vs pruned weights {:?}",
            w.shape(),
            pruned.shape()
        )));
    }
    pruned.sub(w)
}

fn input_norm(x: &DenseMatrix, d: &DenseMatrix) -> Result<f64> {
    if x.cols() != d.rows() {
        return Err(Error::dim(format!(
            "input calibration has {} columns, weights have {} rows",
            x.cols(),
            d.rows()
        )));
    }
    Ok(x.matmul(d)?.frobenius())
}

fn output_norm(y: &DenseMatrix, d: &DenseMatrix) -> Result<f64> {
    if y.rows() != d.cols() {
        return Err(Error::dim(format!(
            "output calibration has {} rows, weights have {} columns",
            y.rows(),
            d.cols()
        )));
    }
    Ok(d.matmul(y)?.frobenius())
}

/// `‖X(W̃ − W)‖²_F`.
pub fn inprecon(x: &DenseMatrix, w: &WeightMatrix, pruned: &WeightMatrix) -> Result<f64> {
    let d = delta(w, pruned)?;
    let n = input_norm(x, &d)?;
    Ok(n * n)
}

/// Evaluates `objective`. A missing side contributes a zero term, as if its
/// calibration matrix were all zeros.
pub fn evaluate(
    objective: Objective,
    x: Option<&DenseMatrix>,
    y: Option<&DenseMatrix>,
    w: &WeightMatrix,
    pruned: &WeightMatrix,
) -> Result<ObjectiveReport> {
    let d = delta(w, pruned)?;
    let inp = x.map(|x| input_norm(x, &d)).transpose()?.unwrap_or(0.0);
    let out = match objective {
        Objective::Inprecon => 0.0,
        _ => y.map(|y| output_norm(y, &d)).transpose()?.unwrap_or(0.0),
    };
    let (input_term, output_term) = match objective {
        Objective::Sym => (inp, out),
        Objective::SymSquared | Objective::Inprecon => (inp * inp, out * out),
    };
    Ok(ObjectiveReport {
        objective,
        value: input_term + output_term,
        input_term,
        output_term,
    })
}

/// `‖X(W̃ − W)‖_F + ‖(W̃ − W)Y‖_F`.
pub fn sym_objective(
    x: &DenseMatrix,
    y: &DenseMatrix,
    w: &WeightMatrix,
    pruned: &WeightMatrix,
) -> Result<ObjectiveReport> {
    evaluate(Objective::Sym, Some(x), Some(y), w, pruned)
}

/// `‖X(W̃ − W)‖²_F + ‖(W̃ − W)Y‖²_F`.
pub fn sym_objective_squared(
    x: &DenseMatrix,
    y: &DenseMatrix,
    w: &WeightMatrix,
    pruned: &WeightMatrix,
) -> Result<ObjectiveReport> {
    evaluate(Objective::SymSquared, Some(x), Some(y), w, pruned)
}
