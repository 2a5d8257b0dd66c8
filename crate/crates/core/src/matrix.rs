//! Dense row-major matrices with deterministic norm and product kernels.
//!
//! All arithmetic is `f64`. Every reduction walks its operands in index order,
//! so results are bit-identical across runs; the only parallelism is over
//! output rows of [`DenseMatrix::matmul`], each of which is still reduced
//! sequentially.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic prefix of the weight/matrix file format.
pub const SYMW_MAGIC: &[u8; 6] = b"SYMW1\0";
/// Only dtype currently defined: little-endian IEEE-754 binary32.
pub const SYMW_DTYPE_F32: u8 = 1;

/// Row-major dense matrix of finite `f64` values.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

/// Weights of one linear layer, `b` input features by `c` outputs.
pub type WeightMatrix = DenseMatrix;

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "non-finite entry {} at ({}, {})",
                values[pos],
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from nested rows. Panics on ragged or non-finite input;
    /// intended for literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            values.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, values).expect("invalid matrix literal")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    /// Square matrix with `diag` on the diagonal.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.values[i * n + i] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for j in 0..rows {
            for k in 0..cols {
                values.push(f(j, k));
            }
        }
        Self { rows, cols, values }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.values[row * self.cols + col]
    }

    /// Panics if `value` is not finite.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(value.is_finite(), "non-finite matrix entry");
        self.values[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn col(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |j| self.values[j * self.cols + col])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |j, k| self.get(k, j))
    }

    /// Elementwise map. Panics if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        assert!(
            values.iter().all(|v| v.is_finite()),
            "non-finite matrix entry"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            values,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            values,
        })
    }

    /// Standard product. Each output entry is a left-to-right dot product.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let n = rhs.cols;
        let mut values = vec![0.0; self.rows * n];
        if n > 0 {
            values.par_chunks_mut(n).enumerate().for_each(|(j, out)| {
                let lhs = self.row(j);
                for (k, slot) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (i, &a) in lhs.iter().enumerate() {
                        acc += a * rhs.values[i * n + k];
                    }
                    *slot = acc;
                }
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: n,
            values,
        })
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn row_pnorm(&self, p: NormOrder) -> Vec<f64> {
        (0..self.rows)
            .map(|j| p.norm(self.row(j).iter().copied()))
            .collect()
    }

    pub fn col_pnorm(&self, p: NormOrder) -> Vec<f64> {
        (0..self.cols).map(|k| p.norm(self.col(k))).collect()
    }

    /// Serializes into the SYMW layout (values narrowed to `f32`).
    pub fn write_symw<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = u32::try_from(self.rows).map_err(|_| Error::config("too many rows for SYMW"))?;
        let cols = u32::try_from(self.cols).map_err(|_| Error::config("too many cols for SYMW"))?;
        w.write_all(SYMW_MAGIC)?;
        w.write_all(&[SYMW_DTYPE_F32])?;
        w.write_all(&rows.to_le_bytes())?;
        w.write_all(&cols.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn to_symw_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(15 + self.values.len() * 4);
        self.write_symw(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_symw<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_symw_bytes(&bytes)
    }

    pub fn from_symw_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = ByteCursor::new(bytes, "SYMW");
        if cur.take(6)? != SYMW_MAGIC {
            return Err(Error::format("SYMW: bad magic"));
        }
        let dtype = cur.u8()?;
        if dtype != SYMW_DTYPE_F32 {
            return Err(Error::format(format!(
                "SYMW: unsupported dtype tag {dtype}"
            )));
        }
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let count = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format("SYMW: shape overflows"))?;
        let values = cur.f32_array(count)?;
        cur.finish()?;
        Self::new(rows, cols, values).map_err(|e| Error::format(format!("SYMW: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_symw_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_symw_bytes())?;
        Ok(())
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for j in 0..self.rows {
            writeln!(f, "  {:?}", self.row(j))?;
        }
        write!(f, "]")
    }
}

/// Supported vector norm orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum NormOrder {
    /// Count of nonzero entries.
    Zero,
    One,
    Two,
    Three,
    Four,
    /// Largest absolute entry.
    Inf,
}

impl NormOrder {
    pub const ALL: [NormOrder; 6] = [
        NormOrder::Zero,
        NormOrder::One,
        NormOrder::Two,
        NormOrder::Three,
        NormOrder::Four,
        NormOrder::Inf,
    ];

    /// Norm of a sequence, accumulated in iteration order.
    pub fn norm(self, xs: impl IntoIterator<Item = f64>) -> f64 {
        let xs = xs.into_iter();
        match self {
            NormOrder::Zero => xs.filter(|&x| x != 0.0).count() as f64,
            NormOrder::One => xs.map(f64::abs).sum(),
            NormOrder::Two => xs.map(|x| x * x).sum::<f64>().sqrt(),
            NormOrder::Three => xs.map(|x| x.abs().powi(3)).sum::<f64>().cbrt(),
            NormOrder::Four => xs.map(|x| x.powi(4)).sum::<f64>().sqrt().sqrt(),
            NormOrder::Inf => xs.fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// `true` for the orders that are genuine norms (absolutely homogeneous).
    pub fn is_homogeneous(self) -> bool {
        !matches!(self, NormOrder::Zero)
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::Zero => "0",
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Three => "3",
            NormOrder::Four => "4",
            NormOrder::Inf => "inf",
        })
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" => Ok(NormOrder::Zero),
            "1" => Ok(NormOrder::One),
            "2" => Ok(NormOrder::Two),
            "3" => Ok(NormOrder::Three),
            "4" => Ok(NormOrder::Four),
            "inf" | "infinity" | "∞" => Ok(NormOrder::Inf),
            other => Err(Error::config(format!(
                "unsupported norm order `{other}` (expected 0, 1, 2, 3, 4 or inf)"
            ))),
        }
    }
}

impl TryFrom<f64> for NormOrder {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            return Ok(NormOrder::Inf);
        }
        match p {
            0.0 => Ok(NormOrder::Zero),
            1.0 => Ok(NormOrder::One),
            2.0 => Ok(NormOrder::Two),
            3.0 => Ok(NormOrder::Three),
            4.0 => Ok(NormOrder::Four),
            other => Err(Error::config(format!("unsupported norm order {other}"))),
        }
    }
}

impl TryFrom<String> for NormOrder {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NormOrder> for String {
    fn from(p: NormOrder) -> String {
        p.to_string()
    }
}

/// Little-endian reader over an in-memory buffer, shared by the binary formats.
pub(crate) struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            what,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(format!("{}: truncated payload", self.what)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32_array(&mut self, count: usize) -> Result<Vec<f64>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::format(format!("{}: length overflows", self.what)))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(format!(
                "{}: {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
