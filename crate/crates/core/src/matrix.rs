//! Row-stochastic matrices, their ordering diagnostics, and the auxiliary
//! stick-variate and band types used by the prior samplers.

use crate::error::{Error, Result};

/// Tolerance used when validating that rows sum to one.
pub const ROW_SUM_TOL: f64 = 1e-10;

/// Default tolerance for the well-ordering check.
pub const ORDER_TOL: f64 = 1e-12;

/// Concentration vector of a Dirichlet-style prior: strictly positive,
/// length at least two.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationVector {
    values: Vec<f64>,
}

impl ConcentrationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "concentration needs at least 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "concentration entries must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { values })
    }

    /// Symmetric concentration (value, ..., value) of the given length.
    pub fn symmetric(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Σ_{a' > a} α_{a'} for a 0-based index.
    pub fn tail_sum(&self, a: usize) -> f64 {
        self.values[a + 1..].iter().sum()
    }
}

/// A K×A matrix whose rows are discrete distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl StochasticMatrix {
    /// Validates entries in [0, 1] and row sums within [`ROW_SUM_TOL`] of 1.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "matrix data length {} does not fit {height}x{width}",
                data.len()
            )));
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 + ROW_SUM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "entry {v} at flat index {i} is outside [0, 1]"
                )));
            }
        }
        for k in 0..height {
            let sum: f64 = data[k * width..(k + 1) * width].iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "row {k} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(height, width, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for k in 0..n {
            data[k * n + k] = 1.0;
        }
        Self {
            height: n,
            width: n,
            data,
        }
    }

    pub fn uniform(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![1.0 / width as f64; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn get(&self, k: usize, a: usize) -> f64 {
        self.data[k * self.width + a]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// New matrix with rows reordered so that row r of the result is
    /// row `perm[r]` of `self`.
    pub fn select_rows(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &src in perm {
            data.extend_from_slice(self.row(src));
        }
        Self {
            height: perm.len(),
            width: self.width,
            data,
        }
    }

    /// Per-row cumulative distribution matrix: entry (k, a) = Σ_{a'≤a} φ_{ka'}.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for k in 0..self.height {
            let mut acc = 0.0;
            for a in 0..self.width {
                acc += self.get(k, a);
                out[k * self.width + a] = acc;
            }
        }
        out
    }

    /// True iff for every pair of rows k < k' and every column prefix the
    /// CDF of row k weakly dominates the CDF of row k' within `tol`.
    pub fn well_ordered(&self, tol: f64) -> bool {
        let cdf = self.cdf();
        for k in 0..self.height {
            for k2 in (k + 1)..self.height {
                for a in 0..self.width {
                    if cdf[k * self.width + a] < cdf[k2 * self.width + a] - tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Pre-sort Beta draws of the sorted stick-breaking construction: column 0
/// holds the first-column variates, columns 1..A−2 the later stick breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct StickVariates {
    height: usize,
    width: usize, // A − 1
    data: Vec<f64>,
}

impl StickVariates {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "stick data length {} does not fit {height}x{width}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "stick variates must lie strictly inside (0,1), got {bad}"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of stick columns, A − 1.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, k: usize, col: usize) -> f64 {
        self.data[k * self.width + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// One stick column across all rows.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.height).map(|k| self.get(k, col)).collect()
    }
}

/// Bandwidth specification for the banded prior: 1 ≤ b < K.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandSpec {
    bandwidth: usize,
    height: usize,
}

impl BandSpec {
    pub fn new(bandwidth: usize, height: usize) -> Result<Self> {
        if bandwidth == 0 || bandwidth >= height {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must satisfy 1 <= b < K, got b={bandwidth}, K={height}"
            )));
        }
        Ok(Self { bandwidth, height })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn in_band(&self, k: usize, k2: usize) -> bool {
        k.abs_diff(k2) <= self.bandwidth
    }

    /// Inclusive column range of the in-band slots of row k.
    pub fn row_slots(&self, k: usize) -> (usize, usize) {
        let lo = k.saturating_sub(self.bandwidth);
        let hi = (k + self.bandwidth).min(self.height - 1);
        (lo, hi)
    }
}
