//! Command-line arguments. Every option can also be set in a TOML file
//! passed with `--config`, using the long flag name in snake case
//! (`--log-response` becomes `log_response`, `--K` becomes `k`). Flags given
//! on the command line win over the file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fliu_core::basis::PenaltyMode;
use fliu_core::dataio::Layout;
use fliu_core::estimators::Method;
use fliu_core::experiment::BasisKind;
use fliu_core::selection::Criterion;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "fliu", version, about = "Functional Liu-type shrinkage regression for scalar-on-function models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit estimators at fixed tuning parameters.
    Fit(FitArgs),
    /// Tune each estimator by GCV or PRESS on the training rows, then fit.
    Tune(TuneArgs),
    /// Closed-form and Monte-Carlo MSE of fLiu as a function of d.
    Risk(RiskArgs),
    /// GCV and PRESS along d at fixed (lambda, alpha), with the plug-in d.
    Degeneracy(DegeneracyArgs),
    /// Write a synthetic functional data set with known coefficients.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DataArgs {
    /// Curve file of one predictor; repeat for several predictors.
    #[arg(long, value_name = "CSV")]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<PathBuf>,
    /// Response file (`id,y` or a single `y` column).
    #[arg(long, value_name = "CSV")]
    pub response: Option<PathBuf>,
    /// Curve file layout [default: wide].
    #[arg(long)]
    pub layout: Option<Layout>,
    /// Basis family: fourier or bspline [default: fourier].
    #[arg(long)]
    pub basis: Option<BasisKind>,
    /// Basis functions per predictor [default: 11].
    #[arg(long = "K", value_name = "K")]
    pub k: Option<usize>,
    /// Fourier period [default: inferred from an equispaced grid].
    #[arg(long)]
    pub period: Option<f64>,
    /// B-spline order [default: 4].
    #[arg(long)]
    pub order: Option<usize>,
    /// fourier, curvature or second_difference [default: matches the basis].
    #[arg(long)]
    pub penalty: Option<PenaltyMode>,
    /// Replace the response by its base-10 logarithm.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub log_response: Option<bool>,
    /// Train/test split as counts (`24/11`) or a train fraction (`0.7`).
    #[arg(long)]
    pub split: Option<String>,
    /// Seed for the split shuffle and Monte-Carlo draws [default: 959].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Run without the thread pool.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub sequential: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Comma-separated estimators [default: ols,ridge,liu,genridge,fliu].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<Method>,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    /// Points of the coefficient-function output grid [default: 101].
    #[arg(long)]
    pub output_grid: Option<usize>,
    /// TOML file with default values for any option.
    #[arg(long, value_name = "TOML")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundArgs {
    /// [default: 1e-6]
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// [default: 1e6]
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// [default: -1000]
    #[arg(long, allow_negative_numbers = true)]
    pub d_min: Option<f64>,
    /// [default: 1]
    #[arg(long, allow_negative_numbers = true)]
    pub d_max: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    pub alpha_min: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// Coarse grid points per axis [default: 5].
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Grid nodes used as refinement starts [default: 3].
    #[arg(long)]
    pub starts: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Comma-separated estimators [default: ols,ridge,liu,genridge,fliu].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<Method>,
    /// gcv or press [default: gcv].
    #[arg(long)]
    pub criterion: Option<Criterion>,
    #[command(flatten)]
    #[serde(flatten)]
    pub bounds: BoundArgs,
    /// Points of the coefficient-function output grid [default: 101].
    #[arg(long)]
    pub output_grid: Option<usize>,
    /// TOML file with default values for any option.
    #[arg(long, value_name = "TOML")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated values of d [default: -2,-1,-0.5,0,0.25,0.5,0.75,1].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub d_grid: Vec<f64>,
    /// Monte-Carlo replications [default: 100000].
    #[arg(long)]
    pub replications: Option<usize>,
    /// Noise variance [default: truth file value, else estimated].
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// `truth.toml` written by `simulate`; its coefficients replace the
    /// generalized-ridge estimate as the true b.
    #[arg(long, value_name = "TOML")]
    pub truth: Option<PathBuf>,
    /// TOML file with default values for any option.
    #[arg(long, value_name = "TOML")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct DegeneracyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated values of d [default: 9 points from -1000 to 0.99].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub d_grid: Vec<f64>,
    /// TOML file with default values for any option.
    #[arg(long, value_name = "TOML")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    /// Sample size [default: 100].
    #[arg(long)]
    pub n: Option<usize>,
    /// Equispaced observation points per curve [default: 50].
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Number of functional predictors [default: 1].
    #[arg(long)]
    pub predictors: Option<usize>,
    /// Odd Fourier basis size of the true curves [default: 7].
    #[arg(long)]
    pub k_true: Option<usize>,
    /// Noise variance [default: 1].
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// AR(1) correlation of the curve scores, in [0, 1) [default: 0.5].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Curve period [default: 1].
    #[arg(long)]
    pub period: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// TOML file with default values for any option.
    #[arg(long, value_name = "TOML")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Overlay the options given on the command line on those of `file`.
/// Keys of the file that the command does not know are rejected.
pub fn merge<T: Serialize + DeserializeOwned>(cli: &T, file: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = file else {
        return Ok(toml::Table::try_from(cli)?.try_into()?);
    };
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let file_keys: BTreeSet<String> = table.keys().cloned().collect();
    for (k, v) in toml::Table::try_from(cli)? {
        table.insert(k, v);
    }
    let merged: T = table
        .try_into()
        .map_err(|e: toml::de::Error| UsageError(format!("{}: {e}", path.display())))?;
    let known: BTreeSet<String> = toml::Table::try_from(&merged)?.keys().cloned().collect();
    let unknown: Vec<&String> = file_keys.difference(&known).collect();
    if !unknown.is_empty() {
        return Err(UsageError(format!("{}: unknown option(s) {unknown:?}", path.display())).into());
    }
    Ok(merged)
}
