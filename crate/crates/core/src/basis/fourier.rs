use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fourier system on `[0, period]`: a constant followed by `(sin, cos)` pairs
/// of increasing frequency, normalized to be orthonormal over one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierBasis {
    n_basis: usize,
    period: f64,
}

impl FourierBasis {
    pub fn new(n_basis: usize, period: f64) -> Result<Self> {
        if n_basis < 3 || n_basis % 2 == 0 {
            return Err(Error::InvalidBasis(format!(
                "Fourier basis needs an odd count >= 3, got {n_basis}"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidBasis(format!("period must be positive, got {period}")));
        }
        Ok(Self { n_basis, period })
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Number of harmonic pairs.
    pub fn n_harmonics(&self) -> usize {
        (self.n_basis - 1) / 2
    }

    /// Angular frequency of harmonic `k` (`k = 0` is the constant).
    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.period
    }

    /// Frequency associated with column `col` of the basis matrix.
    pub fn column_omega(&self, col: usize) -> f64 {
        self.omega(col.div_ceil(2))
    }

    pub fn eval(&self, grid: &[f64]) -> DMatrix<f64> {
        let c0 = 1.0 / self.period.sqrt();
        let c1 = (2.0 / self.period).sqrt();
        DMatrix::from_fn(grid.len(), self.n_basis, |i, col| {
            if col == 0 {
                return c0;
            }
            let arg = self.column_omega(col) * grid[i];
            if col % 2 == 1 {
                c1 * arg.sin()
            } else {
                c1 * arg.cos()
            }
        })
    }

    /// `diag(0, w1^2, w1^2, ..., wK^2, wK^2) / wK^2`.
    pub fn penalty(&self) -> DMatrix<f64> {
        let top = self.omega(self.n_harmonics()).powi(2);
        DMatrix::from_fn(self.n_basis, self.n_basis, |i, j| {
            if i == j {
                self.column_omega(i).powi(2) / top
            } else {
                0.0
            }
        })
    }
}
