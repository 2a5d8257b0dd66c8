//! Per-input-feature activation statistics gathered from calibration tokens.
//!
//! Scores and the prune-and-grow refiner only ever see activations through
//! these aggregates: column ℓ2 norm, mean and population variance per feature.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ByteCursor, DenseMatrix};

pub const SYMA_MAGIC: &[u8; 6] = b"SYMA1\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationStats {
    token_count: u64,
    col_l2: Vec<f64>,
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl ActivationStats {
    /// Stats over zero tokens.
    pub fn empty(feature_count: usize) -> Self {
        Self {
            token_count: 0,
            col_l2: vec![0.0; feature_count],
            mean: vec![0.0; feature_count],
            variance: vec![0.0; feature_count],
        }
    }

    /// Assembles stats from precomputed vectors, checking the invariants.
    pub fn from_parts(
        token_count: u64,
        col_l2: Vec<f64>,
        mean: Vec<f64>,
        variance: Vec<f64>,
    ) -> Result<Self> {
        let n = col_l2.len();
        if mean.len() != n || variance.len() != n {
            return Err(Error::dim(format!(
                "stat vectors have lengths {}, {}, {}",
                n,
                mean.len(),
                variance.len()
            )));
        }
        let all = col_l2.iter().chain(&mean).chain(&variance);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite activation statistic"));
        }
        if col_l2.iter().chain(&variance).any(|&v| v < 0.0) {
            return Err(Error::config("negative norm or variance"));
        }
        if token_count == 0 && all.clone().any(|&v| v != 0.0) {
            return Err(Error::config("zero-token stats must be all zero"));
        }
        Ok(Self {
            token_count,
            col_l2,
            mean,
            variance,
        })
    }

    /// Statistics of a token-rows activation matrix (`tokens x features`).
    pub fn compute(x: &DenseMatrix) -> Self {
        let (tokens, features) = x.shape();
        if tokens == 0 {
            return Self::empty(features);
        }
        let n = tokens as f64;
        let mut col_l2 = Vec::with_capacity(features);
        let mut mean = Vec::with_capacity(features);
        let mut variance = Vec::with_capacity(features);
        for k in 0..features {
            let sq: f64 = x.col(k).map(|v| v * v).sum();
            let mu = x.col(k).sum::<f64>() / n;
            let var = x.col(k).map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            col_l2.push(sq.sqrt());
            mean.push(mu);
            variance.push(var);
        }
        Self {
            token_count: tokens as u64,
            col_l2,
            mean,
            variance,
        }
    }

    /// Pools two partial statistics as if computed over the concatenated tokens.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.feature_count() != other.feature_count() {
            return Err(Error::dim(format!(
                "merging stats over {} and {} features",
                self.feature_count(),
                other.feature_count()
            )));
        }
        if other.token_count == 0 {
            return Ok(self.clone());
        }
        if self.token_count == 0 {
            return Ok(other.clone());
        }
        let n1 = self.token_count as f64;
        let n2 = other.token_count as f64;
        let n = n1 + n2;
        let mut col_l2 = Vec::with_capacity(self.feature_count());
        let mut mean = Vec::with_capacity(self.feature_count());
        let mut variance = Vec::with_capacity(self.feature_count());
        for i in 0..self.feature_count() {
            let (a, b) = (self.col_l2[i], other.col_l2[i]);
            col_l2.push((a * a + b * b).sqrt());
            let (m1, m2) = (self.mean[i], other.mean[i]);
            let delta = m2 - m1;
            mean.push(m1 + delta * (n2 / n));
            let pooled = (n1 * self.variance[i] + n2 * other.variance[i]) / n
                + delta * delta * (n1 / n) * (n2 / n);
            variance.push(pooled.max(0.0));
        }
        Ok(Self {
            token_count: self.token_count + other.token_count,
            col_l2,
            mean,
            variance,
        })
    }

    #[inline]
    pub fn feature_count(&self) -> usize {
        self.col_l2.len()
    }

    #[inline]
    pub fn token_count(&self) -> u64 {
        self.token_count
    }

    #[inline]
    pub fn col_l2(&self) -> &[f64] {
        &self.col_l2
    }

    #[inline]
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    #[inline]
    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    /// SYMA encoding; vectors are narrowed to `f32`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let features = u32::try_from(self.feature_count())
            .map_err(|_| Error::config("too many features for SYMA"))?;
        let mut out = Vec::with_capacity(18 + 12 * self.feature_count());
        out.extend_from_slice(SYMA_MAGIC);
        out.extend_from_slice(&features.to_le_bytes());
        out.extend_from_slice(&self.token_count.to_le_bytes());
        for v in self.col_l2.iter().chain(&self.mean).chain(&self.variance) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = ByteCursor::new(bytes, "SYMA");
        if cur.take(6)? != SYMA_MAGIC {
            return Err(Error::format("SYMA: bad magic or version"));
        }
        let features = cur.u32()? as usize;
        let token_count = cur.u64()?;
        let col_l2 = cur.f32_array(features)?;
        let mean = cur.f32_array(features)?;
        let variance = cur.f32_array(features)?;
        cur.finish()?;
        Self::from_parts(token_count, col_l2, mean, variance)
            .map_err(|e| Error::format(format!("SYMA: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}
