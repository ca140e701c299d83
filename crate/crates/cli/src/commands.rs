use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fliu_core::basis::{FunctionalDataset, PenaltyMode};
use fliu_core::dataio::{self, FitReport, Layout, SplitRule, SplitSpec};
use fliu_core::estimators::{build_q, FitContext, Method, PenaltyParams};
use fliu_core::experiment::{self, BasisChoice, BasisKind, ExperimentConfig, Prepared};
use fliu_core::risk::{self, MonteCarlo, RiskProfile};
use fliu_core::selection::{self, Criterion, DegeneracyReport, PlugIn, TuningBounds};
use fliu_core::simulate::{self, SimulationSpec};
use fliu_core::Execution;
use nalgebra::DVector;
use serde::Serialize;

use crate::args::{DataArgs, DegeneracyArgs, FitArgs, RiskArgs, SimulateArgs, TuneArgs};
use crate::{DataError, UsageError};

pub const DEFAULT_SEED: u64 = 959;

fn execution(data: &DataArgs) -> Execution {
    if data.sequential.unwrap_or(false) {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn out_dir(path: Option<&PathBuf>) -> anyhow::Result<PathBuf> {
    let dir = path.cloned().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Merged options go to `config.toml`; the wall-clock time only to `run.log`.
fn record_run<T: Serialize>(dir: &Path, command: &str, args: &T) -> anyhow::Result<()> {
    dataio::write_toml(&dir.join("config.toml"), args)?;
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let argv: Vec<String> = std::env::args().collect();
    let log = format!(
        "command = {command}\nstarted_unix = {now}\nargv = {argv:?}\nversion = {}\n",
        env!("CARGO_PKG_VERSION")
    );
    fs::write(dir.join("run.log"), log).context("writing run.log")?;
    Ok(())
}

fn load(data: &DataArgs) -> anyhow::Result<FunctionalDataset> {
    if data.curves.is_empty() {
        return Err(UsageError("at least one --curves file is required".into()).into());
    }
    let response = data
        .response
        .as_ref()
        .ok_or_else(|| UsageError("--response is required".into()))?;
    let set = dataio::load_predictors(&data.curves, response, data.layout.unwrap_or(Layout::Wide))?;
    if !data.log_response.unwrap_or(false) {
        return Ok(set);
    }
    if let Some(i) = set.response().iter().position(|&v| !(v > 0.0)) {
        return Err(DataError(format!("--log-response needs positive responses; row {} is {}", i + 1, set.response()[i])).into());
    }
    let y: DVector<f64> = set.response().map(f64::log10);
    Ok(set.with_response(y)?)
}

/// `24/11` (counts that must add up to `n`) or a train fraction in (0, 1).
pub fn parse_split(text: &str, n: usize, seed: u64) -> anyhow::Result<SplitSpec> {
    let bad = || UsageError(format!("cannot parse --split {text:?}; use counts like 24/11 or a fraction like 0.7"));
    let fraction = match text.split_once('/') {
        Some((a, b)) => {
            let train: usize = a.trim().parse().map_err(|_| bad())?;
            let test: usize = b.trim().parse().map_err(|_| bad())?;
            if train + test != n {
                return Err(UsageError(format!("--split {text} does not add up to the {n} samples")).into());
            }
            train as f64 / n as f64
        }
        None => text.trim().parse::<f64>().map_err(|_| bad())?,
    };
    Ok(SplitSpec {
        rule: SplitRule::Fraction(fraction),
        seed,
        shuffle: true,
    })
}

fn experiment_config(data: &DataArgs, n: usize) -> anyhow::Result<ExperimentConfig> {
    let kind = data.basis.unwrap_or(BasisKind::Fourier);
    let penalty = data.penalty.unwrap_or(match kind {
        BasisKind::Fourier => PenaltyMode::Fourier,
        BasisKind::BSpline => PenaltyMode::Curvature,
    });
    let seed = data.seed.unwrap_or(DEFAULT_SEED);
    Ok(ExperimentConfig {
        basis: BasisChoice {
            kind,
            n_basis: data.k.unwrap_or(11),
            period: data.period,
            order: data.order.unwrap_or(4),
        },
        penalty,
        split: data.split.as_deref().map(|s| parse_split(s, n, seed)).transpose()?,
        execution: execution(data),
        ..Default::default()
    })
}

fn methods(list: &[Method]) -> Vec<Method> {
    if list.is_empty() {
        Method::ALL.to_vec()
    } else {
        list.to_vec()
    }
}

#[derive(Serialize)]
struct SplitRecord<'a> {
    train: &'a [usize],
    test: &'a [usize],
    cond_full: f64,
    cond_train: f64,
}

fn write_common(dir: &Path, prep: &Prepared) -> anyhow::Result<()> {
    if let Some(s) = &prep.split {
        dataio::write_toml(
            &dir.join("split.toml"),
            &SplitRecord {
                train: &s.train,
                test: &s.test,
                cond_full: prep.cond_full,
                cond_train: prep.cond_train,
            },
        )?;
    }
    Ok(())
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn print_reports(reports: &[FitReport]) {
    println!(
        "{:<9} {:>12} {:>12} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "method", "lambda", "d", "alpha", "gcv", "press", "train", "test"
    );
    for r in reports {
        println!(
            "{:<9} {:>12} {:>12} {:>10} {:>10} {:>10} {:>10.6} {:>10}{}",
            r.method.name(),
            show(r.params.lambda),
            show(r.params.d),
            show(r.params.alpha),
            show(r.gcv),
            show(r.press),
            r.train_loss,
            show(r.test_loss),
            if r.degenerate { "  (criterion flat in d)" } else { "" }
        );
    }
}

fn finish_runs(dir: &Path, cfg: &ExperimentConfig, prep: &Prepared, runs: &[experiment::MethodRun]) -> anyhow::Result<()> {
    dataio::write_toml(&dir.join("resolved.toml"), cfg)?;
    write_common(dir, prep)?;
    let reports: Vec<FitReport> = runs.iter().map(|r| r.report.clone()).collect();
    for r in &reports {
        dataio::export_report(r, dir, r.method.name())?;
    }
    dataio::write_summary(&dir.join("summary.csv"), &reports)?;
    println!("n_train = {}, cond(train design) = {:.1}", prep.train.n(), prep.cond_train);
    print_reports(&reports);
    Ok(())
}

pub fn fit(args: &FitArgs) -> anyhow::Result<()> {
    let set = load(&args.data)?;
    let mut cfg = experiment_config(&args.data, set.n())?;
    cfg.methods = methods(&args.estimators);
    cfg.output_grid = args.output_grid.unwrap_or(101);
    let p = &args.params;
    for m in &cfg.methods {
        let missing = [
            (m.uses_lambda() && p.lambda.is_none(), "--lambda"),
            (m.uses_d() && p.d.is_none(), "--d"),
            (m.uses_alpha() && p.alpha.is_none(), "--alpha"),
        ];
        if let Some((_, flag)) = missing.iter().find(|(miss, _)| *miss) {
            return Err(UsageError(format!("estimator {m} needs {flag}")).into());
        }
    }
    cfg.fixed = Some(PenaltyParams {
        lambda: p.lambda,
        d: p.d,
        alpha: p.alpha,
    });
    let dir = out_dir(args.data.out.as_ref())?;
    record_run(&dir, "fit", args)?;
    let (prep, runs) = experiment::run(&set, &cfg)?;
    finish_runs(&dir, &cfg, &prep, &runs)
}

fn bounds(args: &TuneArgs) -> TuningBounds {
    let b = &args.bounds;
    let def = TuningBounds::default();
    TuningBounds {
        lambda: [b.lambda_min.unwrap_or(def.lambda[0]), b.lambda_max.unwrap_or(def.lambda[1])],
        d: [b.d_min.unwrap_or(def.d[0]), b.d_max.unwrap_or(def.d[1])],
        alpha: [b.alpha_min.unwrap_or(def.alpha[0]), b.alpha_max.unwrap_or(def.alpha[1])],
        grid_points: b.grid_points.unwrap_or(def.grid_points),
        starts: b.starts.unwrap_or(def.starts),
    }
}

pub fn tune(args: &TuneArgs) -> anyhow::Result<()> {
    let set = load(&args.data)?;
    let mut cfg = experiment_config(&args.data, set.n())?;
    cfg.methods = methods(&args.estimators);
    cfg.output_grid = args.output_grid.unwrap_or(101);
    cfg.criterion = args.criterion.unwrap_or(Criterion::Gcv);
    cfg.bounds = bounds(args);
    cfg.bounds.validate()?;
    let dir = out_dir(args.data.out.as_ref())?;
    record_run(&dir, "tune", args)?;
    let (prep, runs) = experiment::run(&set, &cfg)?;
    finish_runs(&dir, &cfg, &prep, &runs)?;
    for r in &runs {
        if let Some(p) = &r.report.plug_in {
            println!(
                "{}: {} is flat in d; plug-in d = {:.6}, projected to {:.6}",
                r.report.method, cfg.criterion, p.d_plug, p.d_proj
            );
        }
    }
    Ok(())
}

fn required(v: Option<f64>, flag: &str) -> anyhow::Result<f64> {
    v.ok_or_else(|| UsageError(format!("{flag} is required")).into())
}

#[derive(Serialize)]
struct RiskSummary {
    lambda: f64,
    alpha: f64,
    sigma2: f64,
    /// `truth` or `genridge`.
    coefficients: &'static str,
    replications: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    d_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    improves_on_ols: Option<bool>,
    profile: RiskProfile,
}

pub fn risk(args: &RiskArgs) -> anyhow::Result<()> {
    let lambda = required(args.lambda, "--lambda")?;
    let alpha = required(args.alpha, "--alpha")?;
    let set = load(&args.data)?;
    let cfg = experiment_config(&args.data, set.n())?;
    let prep = experiment::prepare(&set, &cfg)?;
    let q = build_q(&prep.train, lambda, alpha)?;
    let (b, sigma2, source) = match &args.truth {
        Some(path) => {
            let truth = simulate::read_truth(path)?;
            if truth.coef.len() != prep.train.m() + 1 {
                return Err(UsageError(format!(
                    "{} has {} coefficients but the design has {} columns; use --K {}",
                    path.display(),
                    truth.coef.len(),
                    prep.train.m() + 1,
                    truth.spec.k_true
                ))
                .into());
            }
            let b = DVector::from_column_slice(&truth.coef);
            (b, args.sigma2.unwrap_or(truth.spec.sigma2), "truth")
        }
        None => {
            let ctx = FitContext::new(&prep.train, &prep.y_train)?;
            let fit = ctx.fit(Method::GenRidge, &PenaltyParams::new(lambda, 0.0, alpha))?;
            let s2 = match args.sigma2 {
                Some(s) => s,
                None => selection::sigma2_hat(&fit)?,
            };
            (fit.coef, s2, "genridge")
        }
    };
    let d_grid = if args.d_grid.is_empty() {
        vec![-2.0, -1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 1.0]
    } else {
        args.d_grid.clone()
    };
    let mc = MonteCarlo {
        replications: args.replications.unwrap_or(MonteCarlo::default().replications),
        seed: args.data.seed.unwrap_or(DEFAULT_SEED),
    };
    let dir = out_dir(args.data.out.as_ref())?;
    record_run(&dir, "risk", args)?;
    let table = risk::risk_scan(&prep.train.z_aug, &q, &b, sigma2, &d_grid, mc, cfg.execution)?;
    dataio::write_risk(&dir.join("risk.csv"), &table.rows)?;
    dataio::write_toml(
        &dir.join("risk.toml"),
        &RiskSummary {
            lambda,
            alpha,
            sigma2,
            coefficients: source,
            replications: mc.replications,
            seed: mc.seed,
            d_opt: table.d_opt,
            improves_on_ols: table.improves_on_ols,
            profile: table.profile.clone(),
        },
    )?;
    println!("{:>10} {:>14} {:>14} {:>12}", "d", "g(d)", "monte carlo", "stderr");
    for r in &table.rows {
        println!("{:>10.4} {:>14.6e} {:>14.6e} {:>12.3e}", r.d, r.g, r.mc, r.mc_stderr);
    }
    match table.d_opt {
        Some(d) => println!("d_opt = {d:.6}"),
        None => println!("d_opt undefined (risk is not strictly convex in d)"),
    }
    Ok(())
}

#[derive(Serialize)]
struct DegeneracySummary {
    lambda: f64,
    alpha: f64,
    #[serde(flatten)]
    report: DegeneracyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    plug_in: Option<PlugIn>,
}

pub fn degeneracy(args: &DegeneracyArgs) -> anyhow::Result<()> {
    let lambda = required(args.lambda, "--lambda")?;
    let alpha = required(args.alpha, "--alpha")?;
    let set = load(&args.data)?;
    let cfg = experiment_config(&args.data, set.n())?;
    let prep = experiment::prepare(&set, &cfg)?;
    let d_grid = if args.d_grid.is_empty() {
        selection::d_probe_grid(&TuningBounds::default())
    } else {
        args.d_grid.clone()
    };
    let dir = out_dir(args.data.out.as_ref())?;
    record_run(&dir, "degeneracy", args)?;
    let report = selection::degeneracy_check(&prep.train, &prep.y_train, lambda, alpha, &d_grid)?;
    let plug_in = selection::plug_in_auto(&prep.train, &prep.y_train, lambda, alpha).ok();
    dataio::write_degeneracy(&dir.join("degeneracy.csv"), &report)?;
    write_common(&dir, &prep)?;
    println!(
        "n = {}, rank = {}, full row rank = {}",
        report.n, report.rank, report.full_row_rank
    );
    println!("{:>12} {:>16} {:>16}", "d", "gcv", "press");
    for i in 0..report.d_grid.len() {
        println!("{:>12.4} {:>16.10e} {:>16.10e}", report.d_grid[i], report.gcv[i], report.press[i]);
    }
    println!(
        "relative spread: gcv {}, press {}; flat in d: {}",
        report.gcv_spread.map_or("-".into(), |s| format!("{s:.3e}")),
        report.press_spread.map_or("-".into(), |s| format!("{s:.3e}")),
        report.degenerate
    );
    if let Some(p) = &plug_in {
        println!("plug-in d = {:.6}, projected to {:.6}", p.d_plug, p.d_proj);
    }
    dataio::write_toml(
        &dir.join("degeneracy.toml"),
        &DegeneracySummary {
            lambda,
            alpha,
            report,
            plug_in,
        },
    )?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let def = SimulationSpec::default();
    let spec = SimulationSpec {
        n: args.n.unwrap_or(def.n),
        grid_points: args.grid_points.unwrap_or(def.grid_points),
        predictors: args.predictors.unwrap_or(def.predictors),
        k_true: args.k_true.unwrap_or(def.k_true),
        sigma2: args.sigma2.unwrap_or(def.sigma2),
        rho: args.rho.unwrap_or(def.rho),
        period: args.period.unwrap_or(def.period),
        seed: args.seed.unwrap_or(def.seed),
    };
    let dir = out_dir(args.out.as_ref())?;
    record_run(&dir, "simulate", args)?;
    let sim = simulate::simulate(&spec)?;
    let written = simulate::write_simulation(&sim, &dir)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}
