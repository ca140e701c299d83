//! Liu-type shrinkage estimators for scalar-on-function regression.
//!
//! Curves are projected onto a Fourier or B-spline basis, giving a score
//! design `Z`. Every estimator here is a member of one family indexed by a
//! penalty weight `lambda`, a shrinkage parameter `d` and a mixing weight
//! `alpha` between an identity and a roughness penalty.

pub mod basis;
pub mod dataio;
pub mod estimators;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod numerics;
pub mod risk;
pub mod selection;
pub mod simulate;

pub use error::{Error, Result};
pub use exec::Execution;
