//! Basis systems, roughness penalties and design-matrix construction.

mod bspline;
mod design;
mod fourier;
pub mod quadrature;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use bspline::{second_difference_penalty, BSplineBasis};
pub use design::{build_design, curve_scores, DesignBundle, FunctionalDataset, QuadratureRule};
pub use fourier::FourierBasis;

use crate::error::{Error, Result};
use crate::numerics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisSpec {
    Fourier(FourierBasis),
    #[serde(rename = "bspline")]
    BSpline(BSplineBasis),
}

/// Roughness penalty family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Diagonal squared-frequency penalty of a Fourier basis.
    Fourier,
    /// Gram matrix of second derivatives of a B-spline basis.
    Curvature,
    /// Squared second differences of adjacent B-spline coefficients.
    SecondDifference,
}

impl std::str::FromStr for PenaltyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier" => Ok(PenaltyMode::Fourier),
            "curvature" => Ok(PenaltyMode::Curvature),
            "second_difference" | "second-difference" => Ok(PenaltyMode::SecondDifference),
            other => Err(Error::InvalidParam(format!("unknown penalty mode {other:?}"))),
        }
    }
}

pub fn build_fourier_basis(n_basis: usize, period: f64) -> Result<BasisSpec> {
    FourierBasis::new(n_basis, period).map(BasisSpec::Fourier)
}

/// Cubic-by-default B-spline basis on `[lo, hi]` with uniform interior knots.
pub fn build_bspline_basis(n_basis: usize, order: usize, lo: f64, hi: f64) -> Result<BasisSpec> {
    BSplineBasis::uniform(n_basis, order, lo, hi).map(BasisSpec::BSpline)
}

impl BasisSpec {
    pub fn n_basis(&self) -> usize {
        match self {
            BasisSpec::Fourier(f) => f.n_basis(),
            BasisSpec::BSpline(b) => b.n_basis(),
        }
    }

    pub fn is_orthonormal(&self) -> bool {
        matches!(self, BasisSpec::Fourier(_))
    }

    /// Natural domain `[lo, hi]`; one period for Fourier.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            BasisSpec::Fourier(f) => (0.0, f.period()),
            BasisSpec::BSpline(b) => b.domain(),
        }
    }

    /// Gram matrix of the basis functions over their domain.
    pub fn gram(&self) -> DMatrix<f64> {
        match self {
            BasisSpec::Fourier(f) => DMatrix::identity(f.n_basis(), f.n_basis()),
            BasisSpec::BSpline(b) => b.gram(0),
        }
    }
}

/// Basis functions sampled on `grid`, one column per function.
pub fn eval_basis(basis: &BasisSpec, grid: &[f64]) -> Result<DMatrix<f64>> {
    if let Some(t) = grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidParam(format!("non-finite grid point {t}")));
    }
    match basis {
        BasisSpec::Fourier(f) => Ok(f.eval(grid)),
        BasisSpec::BSpline(b) => b.eval(grid),
    }
}

pub fn fourier_penalty(basis: &BasisSpec) -> Result<DMatrix<f64>> {
    match basis {
        BasisSpec::Fourier(f) => Ok(f.penalty()),
        _ => Err(Error::BasisKind { expected: "Fourier" }),
    }
}

pub fn bspline_penalty(basis: &BasisSpec, mode: PenaltyMode) -> Result<DMatrix<f64>> {
    let BasisSpec::BSpline(b) = basis else {
        return Err(Error::BasisKind { expected: "B-spline" });
    };
    let raw = match mode {
        PenaltyMode::Curvature => {
            if b.order() < 3 {
                return Err(Error::InvalidBasis(format!(
                    "curvature penalty needs order >= 3, got {}",
                    b.order()
                )));
            }
            b.gram(2)
        }
        PenaltyMode::SecondDifference => second_difference_penalty(b.n_basis())?,
        PenaltyMode::Fourier => return Err(Error::BasisKind { expected: "Fourier" }),
    };
    scale_to_unit_norm(raw)
}

/// Penalty for `basis` under `mode`, already scaled to spectral norm <= 1.
pub fn roughness_penalty(basis: &BasisSpec, mode: PenaltyMode) -> Result<DMatrix<f64>> {
    match mode {
        PenaltyMode::Fourier => fourier_penalty(basis),
        _ => bspline_penalty(basis, mode),
    }
}

/// Divide by the spectral norm when it exceeds one.
pub(crate) fn scale_to_unit_norm(r: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norm = numerics::spectral_norm(&r)?;
    Ok(if norm > 1.0 { r / norm } else { r })
}

/// `sum_k b_k phi_k(t)` on `grid`.
pub fn eval_coefficient_function(b: &[f64], basis: &BasisSpec, grid: &[f64]) -> Result<Vec<f64>> {
    if b.len() != basis.n_basis() {
        return Err(Error::Dimension {
            expected: basis.n_basis(),
            found: b.len(),
        });
    }
    let phi = eval_basis(basis, grid)?;
    let coef = nalgebra::DVector::from_column_slice(b);
    Ok((phi * coef).iter().copied().collect())
}
