//! End-to-end runs: basis expansion, train/test split, tuning and fitting of
//! each requested estimator, and the resulting reports.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{
    build_bspline_basis, build_design, build_fourier_basis, eval_coefficient_function, BasisSpec, DesignBundle,
    FunctionalDataset, PenaltyMode,
};
use crate::dataio::{split_indices, BetaCurve, FitReport, SplitIndices, SplitSpec};
use crate::error::{Error, Result};
use crate::estimators::{predict, EstimatorFit, FitContext, Method, PenaltyParams};
use crate::exec::Execution;
use crate::numerics::cond2;
use crate::selection::{self, Criterion, TuningBounds, TuningResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Fourier,
    BSpline,
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourier" => Ok(BasisKind::Fourier),
            "bspline" | "b-spline" => Ok(BasisKind::BSpline),
            other => Err(Error::InvalidParam(format!("unknown basis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisChoice {
    pub kind: BasisKind,
    pub n_basis: usize,
    /// Fourier period. Defaults to the span of an equispaced periodic grid,
    /// `(t_T - t_1) T / (T - 1)`.
    pub period: Option<f64>,
    /// B-spline order.
    pub order: usize,
}

impl BasisChoice {
    pub fn build(&self, grid: &[f64]) -> Result<BasisSpec> {
        let (first, last) = match grid {
            [first, .., last] => (*first, *last),
            _ => return Err(Error::GridMismatch("need at least two grid points".into())),
        };
        match self.kind {
            BasisKind::Fourier => {
                let t = grid.len() as f64;
                let period = self.period.unwrap_or((last - first) * t / (t - 1.0));
                build_fourier_basis(self.n_basis, period)
            }
            BasisKind::BSpline => build_bspline_basis(self.n_basis, self.order, first, last),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub basis: BasisChoice,
    pub penalty: PenaltyMode,
    pub methods: Vec<Method>,
    pub criterion: Criterion,
    pub bounds: TuningBounds,
    pub split: Option<SplitSpec>,
    /// Use these parameters instead of tuning.
    pub fixed: Option<PenaltyParams>,
    /// Points at which coefficient functions are reported.
    pub output_grid: usize,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            basis: BasisChoice {
                kind: BasisKind::Fourier,
                n_basis: 11,
                period: None,
                order: 4,
            },
            penalty: PenaltyMode::Fourier,
            methods: Method::ALL.to_vec(),
            criterion: Criterion::Gcv,
            bounds: TuningBounds::default(),
            split: None,
            fixed: None,
            output_grid: 101,
            execution: Execution::default(),
        }
    }
}

/// Design on all rows plus its training/test partition.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub full: DesignBundle,
    pub y: DVector<f64>,
    pub split: Option<SplitIndices>,
    pub train: DesignBundle,
    pub y_train: DVector<f64>,
    pub cond_full: f64,
    pub cond_train: f64,
}

impl Prepared {
    pub fn test_rows(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        self.split
            .as_ref()
            .map(|s| (self.full.z_aug.select_rows(&s.test), self.y.select_rows(&s.test)))
    }
}

pub fn prepare(data: &FunctionalDataset, cfg: &ExperimentConfig) -> Result<Prepared> {
    let basis = cfg.basis.build(data.grid())?;
    let bases = vec![basis; data.n_predictors()];
    let full = build_design(data, &bases, cfg.penalty)?;
    let y = data.response().clone();
    let split = cfg.split.as_ref().map(|s| split_indices(data.n(), s)).transpose()?;
    let (train, y_train) = match &split {
        Some(s) => (full.rows(&s.train), y.select_rows(&s.train)),
        None => (full.clone(), y.clone()),
    };
    let cond_full = cond2(&full.z_aug)?;
    let cond_train = cond2(&train.z_aug)?;
    Ok(Prepared {
        full,
        y,
        split,
        train,
        y_train,
        cond_full,
        cond_train,
    })
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub fit: EstimatorFit,
    pub tuning: Option<TuningResult>,
    pub report: FitReport,
}

fn needs_tuning(method: Method) -> bool {
    method.uses_lambda() || method.uses_d() || method.uses_alpha()
}

pub fn run_method(prep: &Prepared, cfg: &ExperimentConfig, method: Method) -> Result<MethodRun> {
    let (params, tuning) = match (&cfg.fixed, needs_tuning(method)) {
        (_, false) => (PenaltyParams::default(), None),
        (Some(p), true) => (p.restrict(method), None),
        (None, true) => {
            let t = selection::tune(&prep.train, &prep.y_train, method, cfg.criterion, &cfg.bounds, cfg.execution)?;
            (t.params, Some(t))
        }
    };
    let ctx = FitContext::new(&prep.train, &prep.y_train)?;
    let fit = ctx.fit(method, &params)?;
    let sh = crate::estimators::shrinkage(&prep.train, method, &params)?;
    let gcv = selection::gcv_score(&ctx, &sh).ok();
    let press = selection::press_score(&ctx, &sh).ok();
    let n_train = prep.train.n();
    let test = prep.test_rows();
    let test_loss = match &test {
        Some((z, y)) => Some((predict(&fit, z)? - y).norm_squared() / y.len() as f64),
        None => None,
    };
    let beta = beta_curves(&prep.train, &fit, cfg.output_grid)?;
    let report = FitReport {
        method,
        params: fit.params,
        criterion: tuning.as_ref().map(|t| t.criterion.to_string()),
        gcv,
        press,
        n_train,
        n_test: test.as_ref().map_or(0, |t| t.1.len()),
        train_loss: fit.rss() / n_train as f64,
        test_loss,
        trace_h: fit.trace,
        cond_full: prep.split.is_some().then_some(prep.cond_full),
        cond_train: prep.cond_train,
        degenerate: tuning.as_ref().is_some_and(|t| t.degenerate),
        plug_in: tuning.as_ref().and_then(|t| t.plug_in.clone()),
        coef: fit.coef.iter().copied().collect(),
        residuals: fit.residuals.iter().copied().collect(),
        beta,
        trace: tuning.as_ref().map(|t| t.trace.clone()).unwrap_or_default(),
        risk: Vec::new(),
    };
    Ok(MethodRun { fit, tuning, report })
}

/// Coefficient function of each predictor on `points` equispaced points of
/// its basis domain.
pub fn beta_curves(bundle: &DesignBundle, fit: &EstimatorFit, points: usize) -> Result<Vec<BetaCurve>> {
    (0..bundle.bases.len())
        .map(|j| {
            let basis = &bundle.bases[j];
            let (lo, hi) = basis.domain();
            let grid: Vec<f64> = (0..points)
                .map(|i| lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64)
                .collect();
            let block = bundle.block(j);
            let coef = &fit.coef.as_slice()[block.start + 1..block.end + 1];
            let values = eval_coefficient_function(coef, basis, &grid)?;
            Ok(BetaCurve { grid, values })
        })
        .collect()
}

pub fn run(data: &FunctionalDataset, cfg: &ExperimentConfig) -> Result<(Prepared, Vec<MethodRun>)> {
    let prep = prepare(data, cfg)?;
    let runs = cfg
        .methods
        .iter()
        .map(|&m| run_method(&prep, cfg, m))
        .collect::<Result<Vec<_>>>()?;
    Ok((prep, runs))
}
