//! Keep/prune masks built from score matrices.
//!
//! Selection is deterministic: among equal scores the entry with the lower
//! row-major index is pruned first (unstructured) or kept first (N:M).

use std::cmp::Ordering;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ByteCursor, WeightMatrix};
use crate::scores::ScoreMatrix;

pub const SYMM_MAGIC: &[u8; 6] = b"SYMM1\0";

const TAG_UNSTRUCTURED: u8 = 0;
const TAG_NM: u8 = 1;

/// Scope within which scores compete for pruning slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonGroup {
    #[default]
    PerLayer,
    PerRow,
    PerColumn,
}

impl ComparisonGroup {
    /// Row-major linear indices of each group.
    pub fn groups(self, rows: usize, cols: usize) -> Vec<Vec<usize>> {
        match self {
            ComparisonGroup::PerLayer => vec![(0..rows * cols).collect()],
            ComparisonGroup::PerRow => (0..rows)
                .map(|j| (j * cols..(j + 1) * cols).collect())
                .collect(),
            ComparisonGroup::PerColumn => (0..cols)
                .map(|k| (0..rows).map(|j| j * cols + k).collect())
                .collect(),
        }
    }
}

impl FromStr for ComparisonGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "per_layer" | "layer" => Ok(ComparisonGroup::PerLayer),
            "per_row" | "row" => Ok(ComparisonGroup::PerRow),
            "per_column" | "column" => Ok(ComparisonGroup::PerColumn),
            other => Err(Error::config(format!("unknown comparison group `{other}`"))),
        }
    }
}

impl fmt::Display for ComparisonGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComparisonGroup::PerLayer => "per_layer",
            ComparisonGroup::PerRow => "per_row",
            ComparisonGroup::PerColumn => "per_column",
        })
    }
}

/// Direction along which N:M groups of consecutive entries are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmAxis {
    /// Groups run down each column: `m` consecutive input features per output.
    #[default]
    InputDim,
    /// Groups run along each row: `m` consecutive outputs per input feature.
    OutputDim,
}

impl NmAxis {
    fn tag(self) -> u8 {
        match self {
            NmAxis::InputDim => 0,
            NmAxis::OutputDim => 1,
        }
    }

    /// Row-major linear indices of every aligned group, or an error when the
    /// dimension along the axis is not a multiple of `m`.
    pub fn groups(self, rows: usize, cols: usize, m: usize) -> Result<Vec<Vec<usize>>> {
        let along = match self {
            NmAxis::InputDim => rows,
            NmAxis::OutputDim => cols,
        };
        if m == 0 || along % m != 0 {
            return Err(Error::config(format!(
                "dimension {along} along {self} is not divisible by group size {m}"
            )));
        }
        let mut out = Vec::with_capacity(rows * cols / m);
        match self {
            NmAxis::InputDim => {
                for k in 0..cols {
                    for g in 0..rows / m {
                        out.push((g * m..(g + 1) * m).map(|j| j * cols + k).collect());
                    }
                }
            }
            NmAxis::OutputDim => {
                for j in 0..rows {
                    for g in 0..cols / m {
                        out.push((g * m..(g + 1) * m).map(|k| j * cols + k).collect());
                    }
                }
            }
        }
        Ok(out)
    }
}

impl FromStr for NmAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "input_dim" | "input" => Ok(NmAxis::InputDim),
            "output_dim" | "output" => Ok(NmAxis::OutputDim),
            other => Err(Error::config(format!("unknown N:M axis `{other}`"))),
        }
    }
}

impl fmt::Display for NmAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NmAxis::InputDim => "input_dim",
            NmAxis::OutputDim => "output_dim",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MaskPattern {
    Unstructured { epsilon: f32 },
    Nm { n: u8, m: u8, axis: NmAxis },
}

impl fmt::Display for MaskPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskPattern::Unstructured { epsilon } => write!(f, "unstructured({epsilon})"),
            MaskPattern::Nm { n, m, axis } => write!(f, "{n}:{m}/{axis}"),
        }
    }
}

/// Bit-packed keep(1)/prune(0) matrix, row-major, most significant bit first.
#[derive(Clone, PartialEq)]
pub struct SparsityMask {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
    pattern: MaskPattern,
}

impl SparsityMask {
    pub fn ones(rows: usize, cols: usize, pattern: MaskPattern) -> Self {
        let mut m = Self {
            rows,
            cols,
            bits: vec![0; (rows * cols).div_ceil(8)],
            pattern,
        };
        for i in 0..rows * cols {
            m.set_linear(i, true);
        }
        m
    }

    pub fn zeros(rows: usize, cols: usize, pattern: MaskPattern) -> Self {
        Self {
            rows,
            cols,
            bits: vec![0; (rows * cols).div_ceil(8)],
            pattern,
        }
    }

    pub fn from_bools(
        rows: usize,
        cols: usize,
        keep: &[bool],
        pattern: MaskPattern,
    ) -> Result<Self> {
        if keep.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} mask bits for a {rows}x{cols} matrix",
                keep.len()
            )));
        }
        let mut m = Self::zeros(rows, cols, pattern);
        for (i, &b) in keep.iter().enumerate() {
            m.set_linear(i, b);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn pattern(&self) -> MaskPattern {
        self.pattern
    }

    #[inline]
    pub fn get_linear(&self, i: usize) -> bool {
        self.bits[i / 8] & (0x80 >> (i % 8)) != 0
    }

    #[inline]
    pub fn set_linear(&mut self, i: usize, keep: bool) {
        let bit = 0x80 >> (i % 8);
        if keep {
            self.bits[i / 8] |= bit;
        } else {
            self.bits[i / 8] &= !bit;
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.get_linear(row * self.cols + col)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, keep: bool) {
        self.set_linear(row * self.cols + col, keep)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.rows * self.cols)
            .map(|i| self.get_linear(i))
            .collect()
    }

    pub fn count_ones(&self) -> usize {
        // padding bits are always zero
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn row_ones(&self, row: usize) -> usize {
        (0..self.cols).filter(|&k| self.get(row, k)).count()
    }

    pub fn col_ones(&self, col: usize) -> usize {
        (0..self.rows).filter(|&j| self.get(j, col)).count()
    }

    /// SYMM encoding.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let rows = u32::try_from(self.rows).map_err(|_| Error::config("too many rows for SYMM"))?;
        let cols = u32::try_from(self.cols).map_err(|_| Error::config("too many cols for SYMM"))?;
        let mut out = Vec::with_capacity(22 + self.bits.len());
        out.extend_from_slice(SYMM_MAGIC);
        out.extend_from_slice(&rows.to_le_bytes());
        out.extend_from_slice(&cols.to_le_bytes());
        match self.pattern {
            MaskPattern::Unstructured { epsilon } => {
                out.push(TAG_UNSTRUCTURED);
                out.extend_from_slice(&epsilon.to_le_bytes());
                out.extend_from_slice(&[0, 0, 0]);
            }
            MaskPattern::Nm { n, m, axis } => {
                out.push(TAG_NM);
                out.extend_from_slice(&0f32.to_le_bytes());
                out.extend_from_slice(&[n, m, axis.tag()]);
            }
        }
        out.extend_from_slice(&self.bits);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = ByteCursor::new(bytes, "SYMM");
        if cur.take(6)? != SYMM_MAGIC {
            return Err(Error::format("SYMM: bad magic"));
        }
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let tag = cur.u8()?;
        let epsilon = cur.f32()?;
        let n = cur.u8()?;
        let m = cur.u8()?;
        let axis = cur.u8()?;
        let pattern = match tag {
            TAG_UNSTRUCTURED => {
                if !(0.0..1.0).contains(&epsilon) {
                    return Err(Error::format(format!(
                        "SYMM: epsilon {epsilon} outside [0, 1)"
                    )));
                }
                MaskPattern::Unstructured { epsilon }
            }
            TAG_NM => {
                let axis = match axis {
                    0 => NmAxis::InputDim,
                    1 => NmAxis::OutputDim,
                    other => return Err(Error::format(format!("SYMM: unknown axis tag {other}"))),
                };
                if n == 0 || n > m {
                    return Err(Error::format(format!("SYMM: invalid N:M pattern {n}:{m}")));
                }
                MaskPattern::Nm { n, m, axis }
            }
            other => return Err(Error::format(format!("SYMM: unknown pattern tag {other}"))),
        };
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format("SYMM: shape overflows"))?;
        let bits = cur.take(total.div_ceil(8))?.to_vec();
        cur.finish()?;
        let mask = Self {
            rows,
            cols,
            bits,
            pattern,
        };
        if total % 8 != 0 {
            let last = mask.bits[mask.bits.len() - 1];
            if last & (0xFFu8 >> (total % 8)) != 0 {
                return Err(Error::format("SYMM: nonzero padding bits"));
            }
        }
        Ok(mask)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

impl fmt::Debug for SparsityMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "SparsityMask {}x{} {} [",
            self.rows, self.cols, self.pattern
        )?;
        for j in 0..self.rows {
            let row: String = (0..self.cols)
                .map(|k| if self.get(j, k) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        write!(f, "]")
    }
}

/// Total order used for selection: score first, then linear index.
fn by_score_then_index(values: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b))
}

/// Prunes the `⌊ε·|group|⌋` lowest scores in every comparison group.
pub fn build_unstructured_mask(
    scores: &ScoreMatrix,
    epsilon: f64,
    group: ComparisonGroup,
) -> Result<SparsityMask> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::config(format!(
            "sparsity ratio {epsilon} outside [0, 1)"
        )));
    }
    let (rows, cols) = scores.shape();
    let values = scores.values();
    let mut mask = SparsityMask::ones(
        rows,
        cols,
        MaskPattern::Unstructured {
            epsilon: epsilon as f32,
        },
    );
    for mut members in group.groups(rows, cols) {
        let prune = (epsilon * members.len() as f64).floor() as usize;
        members.sort_by(by_score_then_index(values));
        for &i in &members[..prune] {
            mask.set_linear(i, false);
        }
    }
    Ok(mask)
}

/// Keeps the `n` highest scores of every aligned group of `m` entries along `axis`.
pub fn build_nm_mask(
    scores: &ScoreMatrix,
    n: usize,
    m: usize,
    axis: NmAxis,
) -> Result<SparsityMask> {
    if n == 0 || n > m {
        return Err(Error::config(format!("invalid N:M pattern {n}:{m}")));
    }
    let (n8, m8) = match (u8::try_from(n), u8::try_from(m)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => {
            return Err(Error::config(
                "N:M group sizes above 255 are not representable",
            ))
        }
    };
    let (rows, cols) = scores.shape();
    let values = scores.values();
    let mut mask = SparsityMask::zeros(rows, cols, MaskPattern::Nm { n: n8, m: m8, axis });
    for mut members in axis.groups(rows, cols, m)? {
        // descending score, ascending index
        members.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
        for &i in &members[..n] {
            mask.set_linear(i, true);
        }
    }
    Ok(mask)
}

pub fn apply_mask(w: &WeightMatrix, mask: &SparsityMask) -> Result<WeightMatrix> {
    if w.shape() != mask.shape() {
        return Err(Error::dim(format!(
            "weights {:?} vs mask {:?}",
            w.shape(),
            mask.shape()
        )));
    }
    let values = w
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if mask.get_linear(i) { v } else { 0.0 })
        .collect();
    WeightMatrix::new(w.rows(), w.cols(), values)
}

/// Fraction of kept entries; an empty mask has density 1.
pub fn mask_density(mask: &SparsityMask) -> f64 {
    let total = mask.rows * mask.cols;
    if total == 0 {
        return 1.0;
    }
    mask.count_ones() as f64 / total as f64
}
