use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{eval_basis, roughness_penalty, scale_to_unit_norm, BasisSpec, PenaltyMode};
use crate::error::{Error, Result};
use crate::numerics;

/// Discretized curves on a shared grid plus scalar responses.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDataset {
    grid: Vec<f64>,
    /// One `n x T` matrix per functional predictor.
    curves: Vec<DMatrix<f64>>,
    response: DVector<f64>,
    labels: Option<Vec<String>>,
}

impl FunctionalDataset {
    pub fn new(
        grid: Vec<f64>,
        curves: Vec<DMatrix<f64>>,
        response: DVector<f64>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::GridMismatch("grid must be finite and strictly increasing".into()));
        }
        if curves.is_empty() {
            return Err(Error::DegenerateInput("dataset has no functional predictor".into()));
        }
        let n = response.len();
        if n < 2 {
            return Err(Error::DegenerateInput(format!("need at least 2 samples, got {n}")));
        }
        for (j, w) in curves.iter().enumerate() {
            if w.ncols() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "predictor {j} has {} columns but the grid has {} points",
                    w.ncols(),
                    grid.len()
                )));
            }
            if w.nrows() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: w.nrows(),
                });
            }
            numerics::ensure_finite(w)?;
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("response contains non-finite values".into()));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: l.len(),
                });
            }
        }
        Ok(Self {
            grid,
            curves,
            response,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn curves(&self) -> &[DMatrix<f64>] {
        &self.curves
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn n_predictors(&self) -> usize {
        self.curves.len()
    }

    pub fn with_response(mut self, response: DVector<f64>) -> Result<Self> {
        if response.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                found: response.len(),
            });
        }
        self.response = response;
        Ok(self)
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let curves = self.curves.iter().map(|w| w.select_rows(idx)).collect();
        Self {
            grid: self.grid.clone(),
            curves,
            response: self.response.select_rows(idx),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i].clone()).collect()),
        }
    }
}

/// How curve inner products with the basis were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Least-squares projection of each curve onto the basis sampled on the
    /// observation grid; basis Gram matrices by Gauss-Legendre.
    GridLeastSquares,
    /// Scores supplied directly.
    Supplied,
}

/// Design matrices and penalties shared by every estimator.
#[derive(Debug, Clone)]
pub struct DesignBundle {
    /// `n x m` score design.
    pub z: DMatrix<f64>,
    /// `n x (m + 1)`, leading column of ones.
    pub z_aug: DMatrix<f64>,
    /// `z_aug^T z_aug`.
    pub gram: DMatrix<f64>,
    /// `m x m` roughness penalty, spectral norm <= 1.
    pub penalty: DMatrix<f64>,
    /// Penalty padded with a zero intercept row and column.
    pub penalty_aug: DMatrix<f64>,
    pub bases: Vec<BasisSpec>,
    pub quadrature: QuadratureRule,
}

impl DesignBundle {
    /// Bundle from an explicit score design and penalty.
    pub fn from_scores(z: DMatrix<f64>, penalty: DMatrix<f64>) -> Result<Self> {
        Self::assemble(z, penalty, Vec::new(), QuadratureRule::Supplied)
    }

    fn assemble(
        z: DMatrix<f64>,
        penalty: DMatrix<f64>,
        bases: Vec<BasisSpec>,
        quadrature: QuadratureRule,
    ) -> Result<Self> {
        numerics::ensure_finite(&z)?;
        numerics::ensure_finite(&penalty)?;
        let m = z.ncols();
        if penalty.shape() != (m, m) {
            return Err(Error::Dimension {
                expected: m,
                found: penalty.nrows(),
            });
        }
        if !numerics::is_symmetric(&penalty, 1e-10) {
            return Err(Error::InvalidParam("penalty must be symmetric".into()));
        }
        let z_aug = augment(&z);
        let gram = z_aug.transpose() * &z_aug;
        let mut penalty_aug = DMatrix::zeros(m + 1, m + 1);
        penalty_aug.view_mut((1, 1), (m, m)).copy_from(&penalty);
        Ok(Self {
            z,
            z_aug,
            gram,
            penalty,
            penalty_aug,
            bases,
            quadrature,
        })
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    /// Number of basis coefficients, excluding the intercept.
    pub fn m(&self) -> usize {
        self.z.ncols()
    }

    /// Bundle restricted to rows `idx`; penalty and bases are shared.
    pub fn rows(&self, idx: &[usize]) -> Self {
        let z = self.z.select_rows(idx);
        let z_aug = self.z_aug.select_rows(idx);
        let gram = z_aug.transpose() * &z_aug;
        Self {
            z,
            z_aug,
            gram,
            penalty: self.penalty.clone(),
            penalty_aug: self.penalty_aug.clone(),
            bases: self.bases.clone(),
            quadrature: self.quadrature,
        }
    }

    /// Column range of predictor `j` inside `z` (not `z_aug`).
    pub fn block(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.bases[..j].iter().map(BasisSpec::n_basis).sum();
        start..start + self.bases[j].n_basis()
    }
}

pub(crate) fn augment(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::from_element(z.nrows(), z.ncols() + 1, 1.0);
    out.view_mut((0, 1), (z.nrows(), z.ncols())).copy_from(z);
    out
}

/// Least-squares basis coefficients of each curve (rows of `curves`) on `grid`.
pub fn curve_scores(grid: &[f64], curves: &DMatrix<f64>, basis: &BasisSpec) -> Result<DMatrix<f64>> {
    let k = basis.n_basis();
    if grid.len() < k {
        return Err(Error::UnderdeterminedCurveFit {
            grid: grid.len(),
            basis: k,
        });
    }
    if curves.ncols() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "curves have {} columns, grid has {} points",
            curves.ncols(),
            grid.len()
        )));
    }
    let phi = eval_basis(basis, grid)?;
    if numerics::numeric_rank(&phi)? < k {
        return Err(Error::UnderdeterminedCurveFit {
            grid: grid.len(),
            basis: k,
        });
    }
    let phi_pinv = numerics::pinv(&phi)?;
    Ok(curves * phi_pinv.transpose())
}

/// Score design and penalties for one basis per predictor.
///
/// Orthonormal (Fourier) bases use the scores directly; B-spline blocks are
/// `C G` with `C` the curve coefficients and `G` the basis Gram matrix, so
/// that `(Z b)_i` is the inner product of curve `i` with `sum_k b_k phi_k`.
/// The assembled block-diagonal penalty gets one final rescaling to keep its
/// spectral norm at most one.
pub fn build_design(
    data: &FunctionalDataset,
    bases: &[BasisSpec],
    mode: PenaltyMode,
) -> Result<DesignBundle> {
    if bases.len() != data.n_predictors() {
        return Err(Error::Dimension {
            expected: data.n_predictors(),
            found: bases.len(),
        });
    }
    let m: usize = bases.iter().map(BasisSpec::n_basis).sum();
    let n = data.n();
    let mut z = DMatrix::zeros(n, m);
    let mut penalty = DMatrix::zeros(m, m);
    let mut offset = 0;
    for (curves, basis) in data.curves().iter().zip(bases) {
        let k = basis.n_basis();
        let scores = curve_scores(data.grid(), curves, basis)?;
        let block = if basis.is_orthonormal() {
            scores
        } else {
            scores * basis.gram()
        };
        z.view_mut((0, offset), (n, k)).copy_from(&block);
        penalty
            .view_mut((offset, offset), (k, k))
            .copy_from(&roughness_penalty(basis, mode)?);
        offset += k;
    }
    let penalty = scale_to_unit_norm(penalty)?;
    DesignBundle::assemble(z, penalty, bases.to_vec(), QuadratureRule::GridLeastSquares)
}
