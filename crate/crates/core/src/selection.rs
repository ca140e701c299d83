//! Tuning-parameter selection: GCV, PRESS, box-constrained tuning, the
//! plug-in Liu parameter and the full-row-rank degeneracy diagnostic.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::DesignBundle;
use crate::error::{Error, Result};
use crate::estimators::{self, build_q, identity0, shrinkage, EstimatorFit, FitContext, Method, PenaltyParams, Shrinkage};
use crate::exec::Execution;
use crate::numerics;
use crate::risk;

/// Relative spread of a criterion over `d` below which it is treated as
/// constant in `d`.
pub const DEGENERACY_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gcv,
    Press,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcv" => Ok(Criterion::Gcv),
            "press" | "loo" | "loocv" => Ok(Criterion::Press),
            other => Err(Error::InvalidParam(format!("unknown criterion {other:?}"))),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::Gcv => "gcv",
            Criterion::Press => "press",
        })
    }
}

impl Criterion {
    pub fn score(self, ctx: &FitContext<'_>, sh: &Shrinkage) -> Result<f64> {
        match self {
            Criterion::Gcv => gcv_score(ctx, sh),
            Criterion::Press => press_score(ctx, sh),
        }
    }
}

/// `(RSS/n) / (1 - tr(H)/n)^2`.
pub fn gcv_score(ctx: &FitContext<'_>, sh: &Shrinkage) -> Result<f64> {
    let n = ctx.n();
    let dof = ctx.residual_dof(sh)?;
    if dof.abs() <= 1e-10 * n as f64 {
        return Err(Error::SaturatedSmoother { trace: n as f64 - dof, n });
    }
    let rss = ctx.residuals(sh)?.norm_squared();
    Ok(rss * n as f64 / (dof * dof))
}

/// `sum_i ((y_i - yhat_i) / (1 - H_ii))^2`.
pub fn press_score(ctx: &FitContext<'_>, sh: &Shrinkage) -> Result<f64> {
    let comp = ctx.leverage_complements(sh)?;
    let r = ctx.residuals(sh)?;
    let mut total = 0.0;
    for (i, (ri, ci)) in r.iter().zip(comp.iter()).enumerate() {
        if ci.abs() <= 1e-10 {
            return Err(Error::LeverageOne { index: i });
        }
        total += (ri / ci).powi(2);
    }
    Ok(total)
}

pub fn gcv(bundle: &DesignBundle, y: &DVector<f64>, lambda: f64, d: f64, alpha: f64) -> Result<f64> {
    let ctx = FitContext::new(bundle, y)?;
    let sh = shrinkage(bundle, Method::FLiu, &PenaltyParams::new(lambda, d, alpha))?;
    gcv_score(&ctx, &sh)
}

pub fn press(bundle: &DesignBundle, y: &DVector<f64>, lambda: f64, d: f64, alpha: f64) -> Result<f64> {
    let ctx = FitContext::new(bundle, y)?;
    let sh = shrinkage(bundle, Method::FLiu, &PenaltyParams::new(lambda, d, alpha))?;
    press_score(&ctx, &sh)
}

/// Leave-one-out prediction errors by literally refitting without each row.
pub fn loo_press(bundle: &DesignBundle, y: &DVector<f64>, method: Method, params: &PenaltyParams) -> Result<f64> {
    let n = bundle.n();
    let mut total = 0.0;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let sub = bundle.rows(&keep);
        let fit = estimators::fit(&sub, &y.select_rows(&keep), method, params)?;
        let pred = bundle.z_aug.row(i).dot(&fit.coef.transpose());
        total += (y[i] - pred).powi(2);
    }
    Ok(total)
}

/// Search box; `lambda` is searched on a log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningBounds {
    pub lambda: [f64; 2],
    pub d: [f64; 2],
    pub alpha: [f64; 2],
    pub grid_points: usize,
    /// Number of best grid nodes used as starting points for refinement.
    pub starts: usize,
}

impl Default for TuningBounds {
    fn default() -> Self {
        Self {
            lambda: [1e-6, 1e6],
            d: [-1000.0, 1.0],
            alpha: [0.0, 1.0],
            grid_points: 5,
            starts: 3,
        }
    }
}

impl TuningBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = |[lo, hi]: [f64; 2]| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.lambda) || !(self.lambda[0] > 0.0) {
            return Err(Error::InvalidParam(format!("bad lambda range {:?}", self.lambda)));
        }
        if !ok(self.d) {
            return Err(Error::InvalidParam(format!("bad d range {:?}", self.d)));
        }
        if !ok(self.alpha) || self.alpha[0] < 0.0 || self.alpha[1] > 1.0 {
            return Err(Error::InvalidParam(format!("bad alpha range {:?}", self.alpha)));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParam("need at least 2 grid points per axis".into()));
        }
        if self.starts < 1 {
            return Err(Error::InvalidParam("need at least one refinement start".into()));
        }
        Ok(())
    }

    /// Transformed search axes (`ln lambda`, `d`, `alpha`) used by `method`.
    fn axes(&self, method: Method) -> Vec<(Param, [f64; 2])> {
        let mut axes = Vec::new();
        if method.uses_lambda() {
            axes.push((Param::Lambda, [self.lambda[0].ln(), self.lambda[1].ln()]));
        }
        if method.uses_d() {
            axes.push((Param::D, self.d));
        }
        if method.uses_alpha() {
            axes.push((Param::Alpha, self.alpha));
        }
        axes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Param {
    Lambda,
    D,
    Alpha,
}

fn params_from(axes: &[(Param, [f64; 2])], x: &[f64]) -> PenaltyParams {
    let mut p = PenaltyParams::default();
    for ((param, _), &v) in axes.iter().zip(x) {
        match param {
            Param::Lambda => p.lambda = Some(v.exp()),
            Param::D => p.d = Some(v),
            Param::Alpha => p.alpha = Some(v),
        }
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Grid,
    Refine,
    Probe,
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub stage: Stage,
    pub lambda: Option<f64>,
    pub d: Option<f64>,
    pub alpha: Option<f64>,
    pub score: f64,
}

impl TraceRecord {
    fn new(iteration: usize, stage: Stage, p: &PenaltyParams, score: f64) -> Self {
        Self {
            iteration,
            stage,
            lambda: p.lambda,
            d: p.d,
            alpha: p.alpha,
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlugIn {
    pub sigma2: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub d_plug: f64,
    pub d_proj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub method: Method,
    pub criterion: Criterion,
    pub params: PenaltyParams,
    pub score: f64,
    pub coarse_params: PenaltyParams,
    pub coarse_score: f64,
    pub evaluations: usize,
    /// Criterion constant in `d` at the selected `(lambda, alpha)`.
    pub degenerate: bool,
    /// Plug-in rule at the selected `(lambda, alpha)`, computed when the
    /// criterion is degenerate in `d`.
    pub plug_in: Option<PlugIn>,
    pub trace: Vec<TraceRecord>,
}

/// Result of [`minimize_in_box`] in the caller's coordinates.
#[derive(Debug, Clone)]
pub struct BoxOptimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub coarse_x: Vec<f64>,
    pub coarse_value: f64,
    pub evaluations: usize,
    pub trace: Vec<(Stage, usize, Vec<f64>, f64)>,
}

/// Central finite-difference step in the caller's coordinates.
const FD_STEP: f64 = 1e-6;
const MAX_ITER: usize = 200;

struct Boxed<'f, F> {
    f: &'f F,
    lo: Vec<f64>,
    width: Vec<f64>,
    count: &'f AtomicUsize,
}

impl<F> Boxed<'_, F>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    fn to_x(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.lo)
            .zip(&self.width)
            .map(|((u, lo), w)| lo + u.clamp(0.0, 1.0) * w)
            .collect()
    }

    fn eval(&self, u: &[f64]) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        match (self.f)(&self.to_x(u)) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }

    /// Gradient in unit coordinates from central differences taken with a
    /// fixed step in the caller's coordinates; one-sided at the box edges.
    fn grad(&self, u: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; u.len()];
        for i in 0..u.len() {
            let h = FD_STEP / self.width[i];
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[i] = (u[i] + h).min(1.0);
            dn[i] = (u[i] - h).max(0.0);
            let span = up[i] - dn[i];
            g[i] = if span > 0.0 {
                (self.eval(&up) - self.eval(&dn)) / span
            } else {
                0.0
            };
        }
        g
    }
}

fn project(u: &mut [f64]) {
    for v in u {
        *v = v.clamp(0.0, 1.0);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected quasi-Newton descent in the unit box from `u0`.
fn refine<F>(b: &Boxed<'_, F>, u0: Vec<f64>, f0: f64, trace: &mut Vec<(Stage, usize, Vec<f64>, f64)>) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let k = u0.len();
    let mut u = u0;
    let mut fu = f0;
    let mut g = b.grad(&u);
    let mut hinv: Option<DMatrix<f64>> = None;
    let mut stalls = 0;
    for iter in 1..=MAX_ITER {
        if g.iter().any(|v| !v.is_finite()) {
            break;
        }
        let free: Vec<bool> = (0..k)
            .map(|i| !((u[i] <= 0.0 && g[i] > 0.0) || (u[i] >= 1.0 && g[i] < 0.0)))
            .collect();
        let gf: Vec<f64> = (0..k).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let gnorm = dot(&gf, &gf).sqrt();
        if gnorm == 0.0 {
            break;
        }
        let scaled_identity = || DMatrix::identity(k, k) * (0.1 / gnorm);
        let h = hinv.get_or_insert_with(scaled_identity);
        let mut p: Vec<f64> = (h as &DMatrix<f64> * DVector::from_column_slice(&gf))
            .iter()
            .enumerate()
            .map(|(i, v)| if free[i] { -v } else { 0.0 })
            .collect();
        if dot(&p, &gf) >= 0.0 {
            *h = scaled_identity();
            p = gf.iter().map(|v| -v * 0.1 / gnorm).collect();
        }

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let mut cand: Vec<f64> = u.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            project(&mut cand);
            let step: Vec<f64> = cand.iter().zip(&u).map(|(a, b)| a - b).collect();
            let fc = b.eval(&cand);
            if fc <= fu + 1e-4 * dot(&g, &step) && fc.is_finite() {
                accepted = Some((cand, fc, step));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, s)) = accepted else {
            break;
        };
        let g_new = b.grad(&cand);
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
            let s_v = DVector::from_column_slice(&s);
            let y_v = DVector::from_column_slice(&yv);
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(k, k);
            let left = &i - &s_v * y_v.transpose() * rho;
            let right = &i - &y_v * s_v.transpose() * rho;
            let h_old = hinv.take().unwrap_or_else(|| DMatrix::identity(k, k));
            hinv = Some(&left * h_old * &right + &s_v * s_v.transpose() * rho);
        }
        let improvement = fu - fc;
        let smax = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        u = cand;
        fu = fc;
        g = g_new;
        trace.push((Stage::Refine, iter, b.to_x(&u), fu));
        if improvement <= 1e-15 * fu.abs() || smax < 1e-12 {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    (u, fu)
}

/// Minimize `f` over the box `axes` (each `[lo, hi]`, in the caller's
/// coordinates): evaluate a regular grid with `grid_points` per axis, then
/// refine from the `starts` best grid nodes by projected BFGS with
/// finite-difference gradients. The result never scores worse than the best
/// grid node.
pub fn minimize_in_box<F>(f: &F, axes: &[[f64; 2]], grid_points: usize, starts: usize, exec: Execution) -> Result<BoxOptimum>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    if grid_points < 2 {
        return Err(Error::InvalidParam("need at least 2 grid points per axis".into()));
    }
    let count = AtomicUsize::new(0);
    let boxed = Boxed {
        f,
        lo: axes.iter().map(|a| a[0]).collect(),
        width: axes.iter().map(|a| a[1] - a[0]).collect(),
        count: &count,
    };
    let k = axes.len();
    let n_nodes = grid_points.pow(k as u32);
    let node = |idx: usize| -> Vec<f64> {
        let mut rem = idx;
        let mut u = vec![0.0; k];
        for v in u.iter_mut().rev() {
            *v = (rem % grid_points) as f64 / (grid_points - 1) as f64;
            rem /= grid_points;
        }
        u
    };
    let values = exec.map_indexed(n_nodes, |i| boxed.eval(&node(i)));
    let mut trace: Vec<(Stage, usize, Vec<f64>, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (Stage::Grid, i, boxed.to_x(&node(i)), v))
        .collect();
    let mut order: Vec<usize> = (0..n_nodes).filter(|&i| values[i].is_finite()).collect();
    if order.is_empty() {
        return Err(Error::TuningFailed("every grid evaluation failed".into()));
    }
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let coarse_u = node(order[0]);
    let coarse_value = values[order[0]];

    let mut best = (coarse_u.clone(), coarse_value);
    if k > 0 {
        for &start in order.iter().take(starts) {
            let (u, v) = refine(&boxed, node(start), values[start], &mut trace);
            if v < best.1 {
                best = (u, v);
            }
        }
    }
    Ok(BoxOptimum {
        x: boxed.to_x(&best.0),
        value: best.1,
        coarse_x: boxed.to_x(&coarse_u),
        coarse_value,
        evaluations: count.load(Ordering::Relaxed),
        trace,
    })
}

/// Tune `method` against an arbitrary objective of its parameters.
pub fn tune_with<F>(objective: F, method: Method, criterion: Criterion, bounds: &TuningBounds, exec: Execution) -> Result<TuningResult>
where
    F: Fn(&PenaltyParams) -> Result<f64> + Sync + Send,
{
    bounds.validate()?;
    let axes = bounds.axes(method);
    let ranges: Vec<[f64; 2]> = axes.iter().map(|a| a.1).collect();
    let f = |x: &[f64]| objective(&params_from(&axes, x));
    let opt = minimize_in_box(&f, &ranges, bounds.grid_points, bounds.starts, exec)?;
    let trace = opt
        .trace
        .iter()
        .map(|(stage, it, x, v)| TraceRecord::new(*it, *stage, &params_from(&axes, x), *v))
        .collect();
    Ok(TuningResult {
        method,
        criterion,
        params: params_from(&axes, &opt.x),
        score: opt.value,
        coarse_params: params_from(&axes, &opt.coarse_x),
        coarse_score: opt.coarse_value,
        evaluations: opt.evaluations,
        degenerate: false,
        plug_in: None,
        trace,
    })
}

/// Probe points in `d` used to detect a criterion that is constant in `d`.
/// `d = 1` is left out: in the full-row-rank regime the smoother is the
/// identity there and both criteria are undefined.
pub fn d_probe_grid(bounds: &TuningBounds) -> Vec<f64> {
    let hi = bounds.d[1].min(0.99);
    let lo = bounds.d[0].min(hi - 1.0);
    (0..9).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect()
}

/// Relative spread `(max - min) / max |v|` of the finite entries.
pub fn relative_spread(values: &[f64]) -> Option<f64> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return None;
    }
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = max.abs().max(min.abs());
    Some(if scale > 0.0 { (max - min) / scale } else { 0.0 })
}

/// Tune `method` by `criterion` on `(bundle, y)`.
///
/// Methods with a Liu parameter are then probed along `d` at the selected
/// `(lambda, alpha)`. If the criterion does not move, `d` is replaced by the
/// projected plug-in value (zero when the plug-in rule is undefined).
pub fn tune(bundle: &DesignBundle, y: &DVector<f64>, method: Method, criterion: Criterion, bounds: &TuningBounds, exec: Execution) -> Result<TuningResult> {
    let ctx = FitContext::new(bundle, y)?;
    let objective = |p: &PenaltyParams| criterion.score(&ctx, &shrinkage(bundle, method, p)?);
    let mut result = tune_with(&objective, method, criterion, bounds, exec)?;
    if !method.uses_d() {
        return Ok(result);
    }
    let probe = d_probe_grid(bounds);
    let scores: Vec<f64> = probe
        .iter()
        .map(|&d| objective(&PenaltyParams { d: Some(d), ..result.params }).unwrap_or(f64::NAN))
        .collect();
    for (i, (&d, &s)) in probe.iter().zip(&scores).enumerate() {
        let p = PenaltyParams { d: Some(d), ..result.params };
        result.trace.push(TraceRecord::new(i, Stage::Probe, &p, s));
    }
    if !relative_spread(&scores).is_some_and(|s| s < DEGENERACY_RTOL) {
        return Ok(result);
    }
    result.degenerate = true;
    let q = match method {
        Method::Liu => identity0(bundle.m() + 1),
        _ => build_q(bundle, result.params.lambda.unwrap_or(1.0), result.params.alpha.unwrap_or(1.0))?,
    };
    let plug = sigma2_for_q(&ctx, &q).and_then(|s2| plug_in_with_q(&ctx, &q, s2));
    let d = match &plug {
        Ok(p) => p.d_proj,
        Err(_) => 0.0,
    };
    result.plug_in = plug.ok();
    result.params.d = Some(d);
    if let Ok(s) = objective(&result.params) {
        result.score = s;
    }
    Ok(result)
}

/// `RSS / (n - tr(H))`.
pub fn sigma2_hat(fit: &EstimatorFit) -> Result<f64> {
    let n = fit.n();
    let dof = n as f64 - fit.trace;
    if !(dof > 1e-10 * n as f64) {
        return Err(Error::InsufficientDof { n, trace: fit.trace });
    }
    Ok(fit.rss() / dof)
}

/// `sigma2_hat` of the `d = 0` fit with penalty `q`.
fn sigma2_for_q(ctx: &FitContext<'_>, q: &DMatrix<f64>) -> Result<f64> {
    let sh = Shrinkage { q: Some(q.clone()), d: 0.0 };
    let fit = ctx.fit_shrinkage(Method::GenRidge, PenaltyParams::default(), &sh)?;
    sigma2_hat(&fit)
}

/// Plug-in Liu parameter for penalty `q`, with the `d = 0` fit as the
/// coefficient estimate.
pub fn plug_in_with_q(ctx: &FitContext<'_>, q: &DMatrix<f64>, sigma2: f64) -> Result<PlugIn> {
    let b = ctx.coefficients(&Shrinkage { q: Some(q.clone()), d: 0.0 })?;
    let profile = risk::mse_coefficients(&ctx.bundle.gram, q, &b, sigma2)?;
    let (c1, c2, c3) = (profile.c1, profile.c2, profile.c3);
    let denom = c2 + c3;
    if !(denom > 0.0) {
        return Err(Error::DegeneratePlugIn(format!("c2 + c3 = {denom}")));
    }
    let d_plug = (2.0 * c3 - c1) / (2.0 * denom);
    Ok(PlugIn {
        sigma2,
        c1,
        c2,
        c3,
        d_plug,
        d_proj: d_plug.max(0.0),
    })
}

pub fn plug_in_d(bundle: &DesignBundle, y: &DVector<f64>, lambda: f64, alpha: f64, sigma2: f64) -> Result<PlugIn> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParam(format!("sigma2 must be finite and >= 0, got {sigma2}")));
    }
    let ctx = FitContext::new(bundle, y)?;
    plug_in_with_q(&ctx, &build_q(bundle, lambda, alpha)?, sigma2)
}

/// Plug-in rule with `sigma2` estimated from the generalized-ridge fit at
/// the same `(lambda, alpha)`.
pub fn plug_in_auto(bundle: &DesignBundle, y: &DVector<f64>, lambda: f64, alpha: f64) -> Result<PlugIn> {
    let ctx = FitContext::new(bundle, y)?;
    let q = build_q(bundle, lambda, alpha)?;
    let s2 = sigma2_for_q(&ctx, &q)?;
    plug_in_with_q(&ctx, &q, s2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub n: usize,
    pub rank: usize,
    pub full_row_rank: bool,
    pub d_grid: Vec<f64>,
    /// `NaN` where the criterion is undefined.
    pub gcv: Vec<f64>,
    pub press: Vec<f64>,
    pub gcv_spread: Option<f64>,
    pub press_spread: Option<f64>,
    /// `max_d max_ij |H_d - (I - (1-d) B)|` when full row rank.
    pub identity_error: Option<f64>,
    /// `n ||By||^2 / tr(B)^2`.
    pub gcv_closed_form: Option<f64>,
    /// `sum_i (By)_i^2 / B_ii^2`.
    pub press_closed_form: Option<f64>,
    pub degenerate: bool,
}

/// GCV and PRESS along `d_grid` at fixed `(lambda, alpha)`, with the
/// full-row-rank closed forms when they apply.
pub fn degeneracy_check(bundle: &DesignBundle, y: &DVector<f64>, lambda: f64, alpha: f64, d_grid: &[f64]) -> Result<DegeneracyReport> {
    let ctx = FitContext::new(bundle, y)?;
    let n = bundle.n();
    let rank = numerics::numeric_rank(&bundle.z_aug)?;
    let full_row_rank = rank == n;
    let q = build_q(bundle, lambda, alpha)?;
    let mut gcv_v = Vec::with_capacity(d_grid.len());
    let mut press_v = Vec::with_capacity(d_grid.len());
    let mut smoothers = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        let sh = shrinkage(bundle, Method::FLiu, &PenaltyParams::new(lambda, d, alpha))?;
        gcv_v.push(gcv_score(&ctx, &sh).unwrap_or(f64::NAN));
        press_v.push(press_score(&ctx, &sh).unwrap_or(f64::NAN));
        if full_row_rank {
            smoothers.push(ctx.smoother(&sh)?);
        }
    }
    let (mut identity_error, mut gcv_cf, mut press_cf) = (None, None, None);
    if full_row_rank {
        let sq = &bundle.gram + &q;
        let b = &bundle.z_aug * numerics::solve_sym(&((&sq + sq.transpose()) * 0.5), &(&q * &ctx.z_pinv))?;
        let eye = DMatrix::identity(n, n);
        let err = d_grid
            .iter()
            .zip(&smoothers)
            .map(|(&d, h)| (h - (&eye - &b * (1.0 - d))).amax())
            .fold(0.0f64, f64::max);
        identity_error = Some(err);
        let by = &b * y;
        let tr = b.trace();
        gcv_cf = Some(n as f64 * by.norm_squared() / (tr * tr));
        press_cf = Some((0..n).map(|i| (by[i] / b[(i, i)]).powi(2)).sum());
    }
    let gcv_spread = relative_spread(&gcv_v);
    let press_spread = relative_spread(&press_v);
    let degenerate = gcv_spread.is_some_and(|s| s < DEGENERACY_RTOL);
    Ok(DegeneracyReport {
        n,
        rank,
        full_row_rank,
        d_grid: d_grid.to_vec(),
        gcv: gcv_v,
        press: press_v,
        gcv_spread,
        press_spread,
        identity_error,
        gcv_closed_form: gcv_cf,
        press_closed_form: press_cf,
        degenerate,
    })
}
