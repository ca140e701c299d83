//! Closed-form risk of the fLiu family and a Monte-Carlo cross-check.
//!
//! With `M = (S+Q)^{-1}` the mean squared error of `b_d` is a quadratic in
//! `d`:
//!
//! ```text
//! g(d) = c0 + c1 d + c2 d^2 + c3 (d-1)^2
//! c0 = s2 tr(M S M)            c1 = 2 s2 tr(M Q M)
//! c2 = s2 tr(M Q S^+ Q M)      c3 = ||M Q b||^2
//! ```
//!
//! These hold when `S` is invertible. For singular `S` the least-squares
//! anchor is biased (`E[b_LS] = P b` with `P = S^+ S`), so the exact risk
//! uses `u = M Q P b`, `v = M Q b` and `c1' = 2 s2 tr(M Q P M)`:
//!
//! ```text
//! g(d) = (c2 + |u|^2) d^2 + (c1' - 2 u.v) d + (c0 + |v|^2)
//! ```
//!
//! which collapses to the first form when `P = I`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics;

/// Which bias formula a result used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasFormula {
    /// `S` invertible: `bias = (d-1) M Q b`.
    Identified,
    /// `S` singular: `bias = M (S + dQ) P b - b`.
    General,
}

#[derive(Debug, Clone)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub bias: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub formula: BiasFormula,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub sigma2: f64,
    /// `(a2, a1, a0)` of the exact quadratic `a2 d^2 + a1 d + a0`.
    pub quadratic: [f64; 3],
    pub formula: BiasFormula,
}

impl RiskProfile {
    pub fn g(&self, d: f64) -> f64 {
        let [a2, a1, a0] = self.quadratic;
        (a2 * d + a1) * d + a0
    }

    /// `g` assembled from the four coefficients alone.
    pub fn g_coefficients(&self, d: f64) -> f64 {
        (self.c2 + self.c3) * d * d + (self.c1 - 2.0 * self.c3) * d + (self.c0 + self.c3)
    }
}

struct Pieces {
    m: DMatrix<f64>,
    s_pinv: DMatrix<f64>,
    proj: DMatrix<f64>,
    formula: BiasFormula,
}

fn validate(s: &DMatrix<f64>, q: &DMatrix<f64>, b: &DVector<f64>, sigma2: f64) -> Result<()> {
    numerics::ensure_finite(s)?;
    numerics::ensure_finite(q)?;
    let k = s.nrows();
    if s.ncols() != k || q.shape() != (k, k) {
        return Err(Error::Dimension {
            expected: k,
            found: q.nrows(),
        });
    }
    if b.len() != k {
        return Err(Error::Dimension {
            expected: k,
            found: b.len(),
        });
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParam(format!("sigma2 must be finite and >= 0, got {sigma2}")));
    }
    Ok(())
}

fn pieces(s: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Pieces> {
    let k = s.nrows();
    let sym = |a: DMatrix<f64>| (&a + a.transpose()) * 0.5;
    let m = numerics::solve_sym(&sym(s + q), &DMatrix::identity(k, k))?;
    let m = sym(m);
    let s_pinv = numerics::pinv(s)?;
    let rank = numerics::numeric_rank(s)?;
    let (proj, formula) = if rank == k {
        (DMatrix::identity(k, k), BiasFormula::Identified)
    } else {
        (&s_pinv * s, BiasFormula::General)
    };
    Ok(Pieces {
        m,
        s_pinv,
        proj,
        formula,
    })
}

/// Mean, bias and covariance of `b_d` under `y = Z b + e`, `Cov(e) = s2 I`.
pub fn fliu_moments(s: &DMatrix<f64>, q: &DMatrix<f64>, b: &DVector<f64>, sigma2: f64, d: f64) -> Result<Moments> {
    validate(s, q, b, sigma2)?;
    let p = pieces(s, q)?;
    let a_d = &p.m * (s + q * d);
    let mean = &a_d * &p.proj * b;
    let bias = match p.formula {
        BiasFormula::Identified => &p.m * q * b * (d - 1.0),
        BiasFormula::General => &mean - b,
    };
    let cov = &a_d * &p.s_pinv * a_d.transpose() * sigma2;
    Ok(Moments {
        mean,
        bias,
        cov,
        formula: p.formula,
    })
}

/// `c0..c3` and the exact quadratic risk.
pub fn mse_coefficients(s: &DMatrix<f64>, q: &DMatrix<f64>, b: &DVector<f64>, sigma2: f64) -> Result<RiskProfile> {
    validate(s, q, b, sigma2)?;
    if q.amax() == 0.0 {
        return Err(Error::DegeneratePlugIn("zero penalty: risk is linear in d".into()));
    }
    let p = pieces(s, q)?;
    let m = &p.m;
    let mq = m * q;
    let c0 = sigma2 * (m * s * m).trace();
    let c1 = 2.0 * sigma2 * (&mq * m).trace();
    let c2 = sigma2 * (&mq * &p.s_pinv * q * m).trace();
    let v = &mq * b;
    let c3 = v.norm_squared();
    let quadratic = match p.formula {
        BiasFormula::Identified => [c2 + c3, c1 - 2.0 * c3, c0 + c3],
        BiasFormula::General => {
            let u = &mq * &p.proj * b;
            let c1x = 2.0 * sigma2 * (&mq * &p.proj * m).trace();
            [c2 + u.norm_squared(), c1x - 2.0 * u.dot(&v), c0 + v.norm_squared()]
        }
    };
    Ok(RiskProfile {
        c0,
        c1,
        c2,
        c3,
        sigma2,
        quadratic,
        formula: p.formula,
    })
}

/// Minimizer of the risk quadratic; `(2 c3 - c1) / (2 (c2 + c3))` when `S` is
/// invertible.
pub fn d_opt(profile: &RiskProfile) -> Result<f64> {
    let [a2, a1, _] = profile.quadratic;
    if !(a2 > 0.0) {
        return Err(Error::DegeneratePlugIn(format!(
            "risk curvature is {a2}; no unique minimizer"
        )));
    }
    Ok(-a1 / (2.0 * a2))
}

/// Monte-Carlo settings for [`risk_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub replications: usize,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self {
            replications: 100_000,
            seed: 20_240_611,
        }
    }
}

/// Replications per RNG stream. Fixed so results do not depend on the
/// execution mode or thread count.
const CHUNK: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub d: f64,
    pub g: f64,
    pub mc: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub profile: RiskProfile,
    pub d_opt: Option<f64>,
    pub rows: Vec<RiskRow>,
    /// Whether some `d` in `[0, 1)` beats `d = 1`, checked on a fine grid.
    /// `None` unless `Q` is positive definite on the penalized block.
    pub improves_on_ols: Option<bool>,
}

/// Empirical `E||b_d - b||^2` for each `d`: `(mean, stderr)`.
pub fn monte_carlo_mse(
    z: &DMatrix<f64>,
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    sigma2: f64,
    d_grid: &[f64],
    mc: MonteCarlo,
    exec: Execution,
) -> Result<Vec<(f64, f64)>> {
    if mc.replications < 2 {
        return Err(Error::InvalidParam("need at least 2 replications".into()));
    }
    let s = z.transpose() * z;
    validate(&s, q, b, sigma2)?;
    let k = s.nrows();
    let z_pinv = numerics::pinv(z)?;
    let sq = (&s + q + (&s + q).transpose()) * 0.5;
    // b_d = (K0 + d K1) y
    let k0 = numerics::solve_sym(&sq, &z.transpose())?;
    let k1 = numerics::solve_sym(&sq, &(q * &z_pinv))?;
    let mean_y = z * b;
    let noise = Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let n_chunks = mc.replications.div_ceil(CHUNK);
    let nd = d_grid.len();

    let partial = exec.map_indexed(n_chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        rng.set_stream(c as u64);
        let reps = CHUNK.min(mc.replications - c * CHUNK);
        let mut sum = vec![0.0; nd];
        let mut sumsq = vec![0.0; nd];
        let mut y = DVector::zeros(mean_y.len());
        for _ in 0..reps {
            for (yi, mi) in y.iter_mut().zip(mean_y.iter()) {
                *yi = mi + noise.sample(&mut rng);
            }
            let w0 = &k0 * &y - b;
            let w1 = &k1 * &y;
            for (j, &d) in d_grid.iter().enumerate() {
                let mut loss = 0.0;
                for i in 0..k {
                    let e = w0[i] + d * w1[i];
                    loss += e * e;
                }
                sum[j] += loss;
                sumsq[j] += loss * loss;
            }
        }
        (sum, sumsq)
    });

    let mut sum = vec![0.0; nd];
    let mut sumsq = vec![0.0; nd];
    for (s, ss) in partial {
        for j in 0..nd {
            sum[j] += s[j];
            sumsq[j] += ss[j];
        }
    }
    let r = mc.replications as f64;
    Ok((0..nd)
        .map(|j| {
            let mean = sum[j] / r;
            let var = ((sumsq[j] - r * mean * mean) / (r - 1.0)).max(0.0);
            (mean, (var / r).sqrt())
        })
        .collect())
}

/// Positive definiteness of `q` on all coordinates it does not leave at zero
/// by construction (the leading intercept slot when its row is zero).
pub fn penalized_block_pd(q: &DMatrix<f64>) -> bool {
    let k = q.nrows();
    let skip = usize::from(k > 1 && q.row(0).amax() == 0.0 && q.column(0).amax() == 0.0);
    let block = q.view((skip, skip), (k - skip, k - skip)).into_owned();
    let ev = numerics::sym_eigenvalues(&block);
    ev[0] > 1e-12 * ev[ev.len() - 1].abs().max(f64::MIN_POSITIVE)
}

/// Closed-form risk next to its Monte-Carlo estimate on `d_grid`.
pub fn risk_scan(
    z: &DMatrix<f64>,
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    sigma2: f64,
    d_grid: &[f64],
    mc: MonteCarlo,
    exec: Execution,
) -> Result<RiskTable> {
    let s = z.transpose() * z;
    let profile = mse_coefficients(&s, q, b, sigma2)?;
    let d_opt = d_opt(&profile).ok();
    let mc_vals = monte_carlo_mse(z, q, b, sigma2, d_grid, mc, exec)?;
    let rows = d_grid
        .iter()
        .zip(mc_vals)
        .map(|(&d, (m, se))| RiskRow {
            d,
            g: profile.g(d),
            mc: m,
            mc_stderr: se,
        })
        .collect();
    let improves_on_ols = penalized_block_pd(q).then(|| {
        let g1 = profile.g(1.0);
        (0..10_000).any(|i| profile.g(i as f64 / 10_000.0) < g1)
    });
    Ok(RiskTable {
        profile,
        d_opt,
        rows,
        improves_on_ols,
    })
}
