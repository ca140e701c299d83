//! Dense linear-algebra kernel.
//!
//! Thin layer over `nalgebra` that adds the conventions the estimators rely
//! on: a fixed relative rank cutoff for pseudo-inverses, symmetric solves
//! that refuse numerically singular systems, and condition numbers measured
//! over the numerically nonzero spectrum.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest admissible `sigma_min / sigma_max` for [`solve_sym`].
pub const SINGULAR_RATIO: f64 = 1e-12;

/// Default relative cutoff: `max(rows, cols) * eps`.
pub fn default_rtol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

pub fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::DegenerateInput("matrix has a zero dimension".into()));
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `m = U diag(s) V^T` computed with faer. nalgebra's SVD does not
/// always reconstruct rank-deficient inputs, so it is not used here.
fn thin_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok((DMatrix::zeros(r, 0), DVector::zeros(0), DMatrix::zeros(c, 0)));
    }
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::DegenerateInput(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    Ok((
        DMatrix::from_fn(r, k, |i, j| u[(i, j)]),
        DVector::from_fn(k, |i, _| s[i]),
        DMatrix::from_fn(c, k, |i, j| v[(i, j)]),
    ))
}

/// Singular value decomposition with singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// Left singular vectors, `rows x r`.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// Right singular vectors, `cols x r`.
    pub v: DMatrix<f64>,
    /// Relative numeric-rank tolerance.
    pub rtol: f64,
}

impl SvdFactors {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        Self::with_rtol(m, default_rtol(m.nrows(), m.ncols()))
    }

    pub fn with_rtol(m: &DMatrix<f64>, rtol: f64) -> Result<Self> {
        if !(rtol > 0.0) {
            return Err(Error::InvalidParam(format!("rtol must be positive, got {rtol}")));
        }
        ensure_finite(m)?;
        let (u, s, v) = thin_svd(m)?;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

        let r = order.len();
        let mut su = DMatrix::zeros(m.nrows(), r);
        let mut sv = DMatrix::zeros(m.ncols(), r);
        let mut ss = DVector::zeros(r);
        for (k, &idx) in order.iter().enumerate() {
            ss[k] = s[idx].max(0.0);
            su.set_column(k, &u.column(idx));
            sv.set_column(k, &v.column(idx));
        }
        Ok(Self {
            u: su,
            singular_values: ss,
            v: sv,
            rtol,
        })
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.iter().copied().next().unwrap_or(0.0)
    }

    /// Absolute cutoff below which singular values count as zero.
    pub fn cutoff(&self) -> f64 {
        self.rtol * self.sigma_max()
    }

    pub fn rank(&self) -> usize {
        let cut = self.cutoff();
        self.singular_values.iter().filter(|&&s| s > cut && s > 0.0).count()
    }

    pub fn pinv(&self) -> DMatrix<f64> {
        let r = self.rank();
        let mut out = DMatrix::zeros(self.v.nrows(), self.u.nrows());
        for k in 0..r {
            let inv = 1.0 / self.singular_values[k];
            // out += v_k u_k^T / s_k
            out.ger(inv, &self.v.column(k), &self.u.column(k), 1.0);
        }
        out
    }
}

/// Moore-Penrose pseudo-inverse with the default rank cutoff.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(SvdFactors::new(m)?.pinv())
}

/// Moore-Penrose pseudo-inverse treating `s < rtol * s_max` as zero.
pub fn pinv_rtol(m: &DMatrix<f64>, rtol: f64) -> Result<DMatrix<f64>> {
    Ok(SvdFactors::with_rtol(m, rtol)?.pinv())
}

pub fn numeric_rank(m: &DMatrix<f64>) -> Result<usize> {
    Ok(SvdFactors::new(m)?.rank())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    ensure_finite(m)?;
    if m.is_empty() {
        return Ok(0.0);
    }
    let s = to_faer(m)
        .singular_values()
        .map_err(|e| Error::DegenerateInput(format!("SVD failed: {e:?}")))?;
    Ok(s.into_iter().fold(0.0, f64::max))
}

/// 2-norm condition number over the singular values above the pinv cutoff.
pub fn cond2(m: &DMatrix<f64>) -> Result<f64> {
    let f = SvdFactors::new(m)?;
    let r = f.rank();
    if r == 0 {
        return Err(Error::DegenerateInput("zero matrix has no condition number".into()));
    }
    Ok(f.sigma_max() / f.singular_values[r - 1])
}

pub fn is_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    DVector::from_vec(ev)
}

/// Solve `A X = B` for symmetric, numerically nonsingular `A`.
pub fn solve_sym(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(a)?;
    ensure_finite(b)?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if !is_symmetric(a, 1e-10) {
        return Err(Error::InvalidParam("solve_sym requires a symmetric matrix".into()));
    }
    let ev = sym_eigenvalues(a);
    let max = ev.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio > SINGULAR_RATIO) {
        return Err(Error::SingularSystem { ratio });
    }
    if ev[0] > 0.0 {
        if let Some(chol) = a.clone().cholesky() {
            return Ok(chol.solve(b));
        }
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularSystem { ratio })
}

/// Vector form of [`solve_sym`].
pub fn solve_sym_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = solve_sym(a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(x.column(0).into_owned())
}
