//! OLS, ridge, classical Liu, generalized ridge and fLiu on an augmented
//! design.
//!
//! All five share one linear form,
//!
//! ```text
//! b = (S + Q)^{-1} (Z'y + d Q b_LS),     b_LS = Z^+ y,
//! ```
//!
//! with `Z` the augmented design, `S = Z'Z` and `Q` a penalty that leaves the
//! intercept alone. OLS is the `Q = 0` member; ridge and generalized ridge fix
//! `d = 0`; classical Liu fixes `Q = I0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::DesignBundle;
use crate::error::{Error, Result};
use crate::numerics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ols,
    Ridge,
    Liu,
    GenRidge,
    FLiu,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ols,
        Method::Ridge,
        Method::Liu,
        Method::GenRidge,
        Method::FLiu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Ridge => "ridge",
            Method::Liu => "liu",
            Method::GenRidge => "genridge",
            Method::FLiu => "fliu",
        }
    }

    pub fn uses_lambda(self) -> bool {
        matches!(self, Method::Ridge | Method::GenRidge | Method::FLiu)
    }

    pub fn uses_d(self) -> bool {
        matches!(self, Method::Liu | Method::FLiu)
    }

    pub fn uses_alpha(self) -> bool {
        matches!(self, Method::GenRidge | Method::FLiu)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Method::Ols),
            "ridge" => Ok(Method::Ridge),
            "liu" => Ok(Method::Liu),
            "genridge" | "gen_ridge" | "gen-ridge" => Ok(Method::GenRidge),
            "fliu" => Ok(Method::FLiu),
            other => Err(Error::InvalidParam(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Tuning parameters; a field is `None` when the method does not use it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub lambda: Option<f64>,
    pub d: Option<f64>,
    pub alpha: Option<f64>,
}

impl PenaltyParams {
    pub fn new(lambda: f64, d: f64, alpha: f64) -> Self {
        Self {
            lambda: Some(lambda),
            d: Some(d),
            alpha: Some(alpha),
        }
    }

    /// Keep only the fields `method` uses.
    pub fn restrict(self, method: Method) -> Self {
        Self {
            lambda: self.lambda.filter(|_| method.uses_lambda()),
            d: self.d.filter(|_| method.uses_d()),
            alpha: self.alpha.filter(|_| method.uses_alpha()),
        }
    }
}

/// Penalty matrix and Liu parameter of one member of the family.
/// `q == None` is OLS.
#[derive(Debug, Clone)]
pub struct Shrinkage {
    pub q: Option<DMatrix<f64>>,
    pub d: f64,
}

#[derive(Debug, Clone)]
pub struct EstimatorFit {
    pub method: Method,
    /// Intercept first.
    pub coef: DVector<f64>,
    pub params: PenaltyParams,
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `tr(H)`, the effective degrees of freedom.
    pub trace: f64,
}

impl EstimatorFit {
    pub fn rss(&self) -> f64 {
        self.residuals.norm_squared()
    }

    pub fn n(&self) -> usize {
        self.fitted.len()
    }
}

/// `I0`: identity with the intercept slot zeroed.
pub fn identity0(dim: usize) -> DMatrix<f64> {
    let mut i0 = DMatrix::identity(dim, dim);
    i0[(0, 0)] = 0.0;
    i0
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("lambda must be finite and >= 0, got {lambda}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

fn check_d(d: f64) -> Result<()> {
    if d.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("d must be finite, got {d}")))
    }
}

/// `lambda (alpha I0 + (1 - alpha) R0)` on the augmented space.
pub fn build_q(bundle: &DesignBundle, lambda: f64, alpha: f64) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    check_alpha(alpha)?;
    let dim = bundle.m() + 1;
    Ok((identity0(dim) * alpha + &bundle.penalty_aug * (1.0 - alpha)) * lambda)
}

fn required(v: Option<f64>, name: &str, method: Method) -> Result<f64> {
    v.ok_or_else(|| Error::InvalidParam(format!("{method} requires {name}")))
}

/// Map a method and its parameters onto `(Q, d)`. A zero `lambda` yields OLS.
pub fn shrinkage(bundle: &DesignBundle, method: Method, params: &PenaltyParams) -> Result<Shrinkage> {
    let dim = bundle.m() + 1;
    let ols = Shrinkage { q: None, d: 1.0 };
    let (lambda, d, alpha) = match method {
        Method::Ols => return Ok(ols),
        Method::Liu => {
            let d = required(params.d, "d", method)?;
            check_d(d)?;
            return Ok(Shrinkage {
                q: Some(identity0(dim)),
                d,
            });
        }
        Method::Ridge => (required(params.lambda, "lambda", method)?, 0.0, 1.0),
        Method::GenRidge => (
            required(params.lambda, "lambda", method)?,
            0.0,
            required(params.alpha, "alpha", method)?,
        ),
        Method::FLiu => (
            required(params.lambda, "lambda", method)?,
            required(params.d, "d", method)?,
            required(params.alpha, "alpha", method)?,
        ),
    };
    check_d(d)?;
    let q = build_q(bundle, lambda, alpha)?;
    if lambda == 0.0 {
        return Ok(ols);
    }
    Ok(Shrinkage { q: Some(q), d })
}

/// Quantities shared by every fit on one training design and response.
///
/// With `Pi = Z Z^+`, `M = (S+Q)^{-1}` and `B = Z M Q Z^+`, every member of
/// the family satisfies
///
/// ```text
/// b   = b_LS - (1-d) M Q b_LS
/// H   = Pi - (1-d) B
/// y - H y = (I - Pi) y + (1-d) Z M Q b_LS
/// n - tr(H) = (n - rank Z) + (1-d) tr(B)
/// ```
///
/// Evaluating these forms keeps the residual and the residual degrees of
/// freedom accurate when `H` is close to the identity, which is where GCV
/// and PRESS are otherwise dominated by cancellation.
#[derive(Debug, Clone)]
pub struct FitContext<'a> {
    pub bundle: &'a DesignBundle,
    pub y: DVector<f64>,
    /// `Z^+`, `(m+1) x n`.
    pub z_pinv: DMatrix<f64>,
    /// `Z^+ y`.
    pub b_ls: DVector<f64>,
    /// `Z'y`.
    pub zty: DVector<f64>,
    pub rank: usize,
    /// `(I - Pi) y`; exactly zero when `Z` has full row rank.
    pub ls_residuals: DVector<f64>,
    /// Diagonal of `I - Pi`; exactly zero when `Z` has full row rank.
    pub ls_complement: DVector<f64>,
}

/// `M Q b_LS` and, on request, `M Q Z^+`.
struct Correction {
    c: DVector<f64>,
    x: Option<DMatrix<f64>>,
}

impl<'a> FitContext<'a> {
    pub fn new(bundle: &'a DesignBundle, y: &DVector<f64>) -> Result<Self> {
        let n = bundle.n();
        if y.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("response contains non-finite values".into()));
        }
        let svd = numerics::SvdFactors::new(&bundle.z_aug)?;
        let rank = svd.rank();
        let z_pinv = svd.pinv();
        let b_ls = &z_pinv * y;
        let zty = bundle.z_aug.transpose() * y;
        let (ls_residuals, ls_complement) = if rank == n {
            (DVector::zeros(n), DVector::zeros(n))
        } else {
            let u = svd.u.columns(0, rank);
            let resid = y - &u * (u.transpose() * y);
            let comp = DVector::from_fn(n, |i, _| (1.0 - u.row(i).norm_squared()).max(0.0));
            (resid, comp)
        };
        Ok(Self {
            bundle,
            y: y.clone(),
            z_pinv,
            b_ls,
            zty,
            rank,
            ls_residuals,
            ls_complement,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    fn correction(&self, q: &DMatrix<f64>, with_x: bool) -> Result<Correction> {
        let k = self.b_ls.len();
        let a = &self.bundle.gram + q;
        let a = (&a + a.transpose()) * 0.5;
        let cols = 1 + if with_x { self.n() } else { 0 };
        let mut rhs = DMatrix::zeros(k, cols);
        rhs.set_column(0, &(q * &self.b_ls));
        if with_x {
            rhs.columns_mut(1, self.n()).copy_from(&(q * &self.z_pinv));
        }
        let sol = numerics::solve_sym(&a, &rhs)?;
        Ok(Correction {
            c: sol.column(0).into_owned(),
            x: with_x.then(|| sol.columns(1, self.n()).into_owned()),
        })
    }

    pub fn coefficients(&self, sh: &Shrinkage) -> Result<DVector<f64>> {
        match &sh.q {
            None => Ok(self.b_ls.clone()),
            Some(q) => {
                let c = self.correction(q, false)?.c;
                Ok(&self.b_ls - c * (1.0 - sh.d))
            }
        }
    }

    /// `y - H y`.
    pub fn residuals(&self, sh: &Shrinkage) -> Result<DVector<f64>> {
        match &sh.q {
            None => Ok(self.ls_residuals.clone()),
            Some(q) => {
                let c = self.correction(q, false)?.c;
                Ok(&self.ls_residuals + &self.bundle.z_aug * c * (1.0 - sh.d))
            }
        }
    }

    pub fn smoother(&self, sh: &Shrinkage) -> Result<DMatrix<f64>> {
        let n = self.n();
        let pi = if self.rank == n {
            DMatrix::identity(n, n)
        } else {
            &self.bundle.z_aug * &self.z_pinv
        };
        match &sh.q {
            None => Ok(pi),
            Some(q) => {
                let x = self.correction(q, true)?.x.expect("requested");
                Ok(pi - &self.bundle.z_aug * x * (1.0 - sh.d))
            }
        }
    }

    /// `n - tr(H)`.
    pub fn residual_dof(&self, sh: &Shrinkage) -> Result<f64> {
        let base = (self.n() - self.rank) as f64;
        match &sh.q {
            None => Ok(base),
            Some(q) => {
                let x = self.correction(q, true)?.x.expect("requested");
                let tr_b = (&self.bundle.z_aug * x).trace();
                Ok(base + (1.0 - sh.d) * tr_b)
            }
        }
    }

    pub fn trace(&self, sh: &Shrinkage) -> Result<f64> {
        Ok(self.n() as f64 - self.residual_dof(sh)?)
    }

    /// Diagonal of `I - H`.
    pub fn leverage_complements(&self, sh: &Shrinkage) -> Result<DVector<f64>> {
        match &sh.q {
            None => Ok(self.ls_complement.clone()),
            Some(q) => {
                let x = self.correction(q, true)?.x.expect("requested");
                let z = &self.bundle.z_aug;
                let b_diag = DVector::from_fn(self.n(), |i, _| z.row(i).dot(&x.column(i).transpose()));
                Ok(&self.ls_complement + b_diag * (1.0 - sh.d))
            }
        }
    }

    /// Diagonal of `H`.
    pub fn leverages(&self, sh: &Shrinkage) -> Result<DVector<f64>> {
        Ok(self.leverage_complements(sh)?.map(|v| 1.0 - v))
    }

    pub fn fit_shrinkage(&self, method: Method, params: PenaltyParams, sh: &Shrinkage) -> Result<EstimatorFit> {
        let coef = self.coefficients(sh)?;
        let fitted = &self.bundle.z_aug * &coef;
        let residuals = &self.y - &fitted;
        let trace = self.trace(sh)?;
        Ok(EstimatorFit {
            method,
            coef,
            params: params.restrict(method),
            fitted,
            residuals,
            trace,
        })
    }

    pub fn fit(&self, method: Method, params: &PenaltyParams) -> Result<EstimatorFit> {
        let sh = shrinkage(self.bundle, method, params)?;
        self.fit_shrinkage(method, *params, &sh)
    }
}

pub fn fit(bundle: &DesignBundle, y: &DVector<f64>, method: Method, params: &PenaltyParams) -> Result<EstimatorFit> {
    FitContext::new(bundle, y)?.fit(method, params)
}

pub fn fit_ols(bundle: &DesignBundle, y: &DVector<f64>) -> Result<EstimatorFit> {
    fit(bundle, y, Method::Ols, &PenaltyParams::default())
}

/// Ridge with an unpenalized intercept.
pub fn fit_ridge(bundle: &DesignBundle, y: &DVector<f64>, lambda: f64) -> Result<EstimatorFit> {
    let params = PenaltyParams {
        lambda: Some(lambda),
        ..Default::default()
    };
    fit(bundle, y, Method::Ridge, &params)
}

pub fn fit_gen_ridge(bundle: &DesignBundle, y: &DVector<f64>, lambda: f64, alpha: f64) -> Result<EstimatorFit> {
    let params = PenaltyParams {
        lambda: Some(lambda),
        alpha: Some(alpha),
        d: None,
    };
    fit(bundle, y, Method::GenRidge, &params)
}

/// Classical Liu, `(S + I0)^{-1}(Z'y + d I0 b_LS)`.
pub fn fit_liu(bundle: &DesignBundle, y: &DVector<f64>, d: f64) -> Result<EstimatorFit> {
    let params = PenaltyParams {
        d: Some(d),
        ..Default::default()
    };
    fit(bundle, y, Method::Liu, &params)
}

pub fn fit_fliu(bundle: &DesignBundle, y: &DVector<f64>, lambda: f64, d: f64, alpha: f64) -> Result<EstimatorFit> {
    fit(bundle, y, Method::FLiu, &PenaltyParams::new(lambda, d, alpha))
}

/// `H_d = Z (S+Q)^{-1} (Z' + d Q Z^+)` for fLiu at `(lambda, d, alpha)`.
pub fn smoother_matrix(bundle: &DesignBundle, lambda: f64, d: f64, alpha: f64) -> Result<DMatrix<f64>> {
    let sh = shrinkage(bundle, Method::FLiu, &PenaltyParams::new(lambda, d, alpha))?;
    let y = DVector::zeros(bundle.n());
    FitContext::new(bundle, &y)?.smoother(&sh)
}

/// `rows * coef` for augmented design rows (leading column of ones).
pub fn predict(fit: &EstimatorFit, rows: &DMatrix<f64>) -> Result<DVector<f64>> {
    if rows.ncols() != fit.coef.len() {
        return Err(Error::Dimension {
            expected: fit.coef.len(),
            found: rows.ncols(),
        });
    }
    Ok(rows * &fit.coef)
}

/// `||y - Z b||^2 + (b - d b_LS)' Q (b - d b_LS)`.
pub fn fliu_objective(ctx: &FitContext<'_>, q: &DMatrix<f64>, d: f64, b: &DVector<f64>) -> f64 {
    let r = &ctx.y - &ctx.bundle.z_aug * b;
    let c = b - &ctx.b_ls * d;
    r.norm_squared() + (c.transpose() * q * &c)[0]
}
