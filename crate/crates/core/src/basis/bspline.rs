use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::quadrature::gauss_legendre_panels;
use crate::error::{Error, Result};

/// B-spline system defined by an order (degree + 1) and a clamped knot vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    order: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// `n_basis` splines of the given order on `[lo, hi]` with equally spaced
    /// interior knots.
    pub fn uniform(n_basis: usize, order: usize, lo: f64, hi: f64) -> Result<Self> {
        if order < 1 || n_basis < order {
            return Err(Error::InvalidBasis(format!(
                "need n_basis >= order >= 1, got n_basis = {n_basis}, order = {order}"
            )));
        }
        let n_interior = n_basis - order;
        let interior: Vec<f64> = (1..=n_interior)
            .map(|i| lo + (hi - lo) * i as f64 / (n_interior + 1) as f64)
            .collect();
        Self::with_interior_knots(order, lo, hi, &interior)
    }

    pub fn with_interior_knots(order: usize, lo: f64, hi: f64, interior: &[f64]) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidBasis(format!("invalid domain [{lo}, {hi}]")));
        }
        if order < 1 {
            return Err(Error::InvalidBasis("order must be at least 1".into()));
        }
        let mut knots = vec![lo; order];
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(hi, order));
        Self::from_knots(order, knots)
    }

    /// Full (clamped) knot vector; boundary knots are repeated `order` times.
    pub fn from_knots(order: usize, knots: Vec<f64>) -> Result<Self> {
        if order < 1 || knots.len() < 2 * order {
            return Err(Error::InvalidBasis("knot vector too short for order".into()));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidBasis("knot vector must be finite and nondecreasing".into()));
        }
        let n_basis = knots.len() - order;
        if !(knots[order - 1] < knots[n_basis]) {
            return Err(Error::InvalidBasis("knot vector spans an empty domain".into()));
        }
        for w in knots.windows(order + 1) {
            if w[order] == w[0] && w[0] != knots[0] && w[0] != knots[knots.len() - 1] {
                return Err(Error::InvalidBasis("interior knot multiplicity exceeds order".into()));
            }
        }
        Ok(Self { order, knots })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.order - 1
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.order
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.order - 1], self.knots[self.n_basis()])
    }

    /// Distinct breakpoints within the domain.
    pub fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.domain();
        let mut out: Vec<f64> = self
            .knots
            .iter()
            .copied()
            .filter(|k| *k >= lo && *k <= hi)
            .collect();
        out.dedup();
        out
    }

    fn find_span(&self, t: f64) -> usize {
        let n = self.n_basis();
        let p = self.degree();
        let u = &self.knots;
        if t >= u[n] {
            // last nondegenerate span
            let mut i = n - 1;
            while i > p && u[i] == u[n] {
                i -= 1;
            }
            return i;
        }
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < u[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Values of the nonzero basis functions and their derivatives at `t`.
    /// Returns the index of the first nonzero function and
    /// `ders[k][j]` = k-th derivative of function `first + j`.
    fn local_derivatives(&self, t: f64, n_deriv: usize) -> (usize, Vec<Vec<f64>>) {
        let p = self.degree();
        let span = self.find_span(t);
        let u = &self.knots;

        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; n_deriv + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let nd = n_deriv.min(p);
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (k, row) in ders.iter_mut().enumerate().take(nd + 1).skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        (span - p, ders)
    }

    fn check_domain(&self, grid: &[f64]) -> Result<()> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (hi - lo);
        match grid.iter().find(|&&t| !(t >= lo - slack && t <= hi + slack)) {
            Some(&point) => Err(Error::Domain { point, lo, hi }),
            None => Ok(()),
        }
    }

    /// `deriv`-th derivative of every basis function on `grid`, `T x K`.
    pub fn eval_derivative(&self, grid: &[f64], deriv: usize) -> Result<DMatrix<f64>> {
        self.check_domain(grid)?;
        let (lo, hi) = self.domain();
        let mut out = DMatrix::zeros(grid.len(), self.n_basis());
        if deriv > self.degree() {
            return Ok(out);
        }
        for (i, &t) in grid.iter().enumerate() {
            let (first, ders) = self.local_derivatives(t.clamp(lo, hi), deriv);
            for (j, v) in ders[deriv].iter().enumerate() {
                out[(i, first + j)] = *v;
            }
        }
        Ok(out)
    }

    pub fn eval(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        self.eval_derivative(grid, 0)
    }

    /// `[G]_{kk'} = integral of phi_k^(deriv) phi_k'^(deriv)` by Gauss-Legendre,
    /// five nodes per knot span (exact for the piecewise polynomials involved
    /// up to order 5).
    pub fn gram(&self, deriv: usize) -> DMatrix<f64> {
        let (nodes, weights) = gauss_legendre_panels(&self.breakpoints());
        let phi = self
            .eval_derivative(&nodes, deriv)
            .expect("quadrature nodes lie inside the domain");
        let mut weighted = phi.clone();
        for (i, w) in weights.iter().enumerate() {
            weighted.row_mut(i).scale_mut(*w);
        }
        let g = phi.transpose() * weighted;
        (&g + g.transpose()) * 0.5
    }
}

/// `D^T D` for the second-order difference operator on `k` coefficients.
pub fn second_difference_penalty(k: usize) -> Result<DMatrix<f64>> {
    if k < 3 {
        return Err(Error::InvalidBasis(format!(
            "second differences need at least 3 coefficients, got {k}"
        )));
    }
    let mut d = DMatrix::zeros(k - 2, k);
    for r in 0..k - 2 {
        d[(r, r)] = 1.0;
        d[(r, r + 1)] = -2.0;
        d[(r, r + 2)] = 1.0;
    }
    Ok(d.transpose() * d)
}
