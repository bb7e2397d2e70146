//! Empirical and model-implied Lyapunov diagnostics.
//!
//! Negativity of `E log Lambda(theta, X_0)` over the observations (or over
//! the model at `theta_0`) certifies continuous invertibility and is the
//! feasibility constraint of the estimator.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dist::InnovationDist;
use crate::error::{Error, Result};
use crate::models::{lipschitz_coeff, ModelKind, ParamBox, ParamVector};
use crate::rng::split_stream;
use crate::simulate::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LyapunovKind {
    EmpiricalOnData,
    ModelImpliedMC,
}

/// Estimated `E log Lambda` with its uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub value: f64,
    pub std_error: f64,
    pub n_or_m: usize,
    pub kind: LyapunovKind,
    /// Some log terms were -infinity (beta = 0 with vanishing innovation
    /// term); the value is reported as -infinity rather than an error since
    /// such terms only strengthen the constraint.
    pub neg_infinity: bool,
    /// Geometric truncation tail bound of the inner series (MC reports only).
    pub tail_bound: Option<f64>,
}

/// Sample mean and standard error of `log Lambda(theta, X_t)` over a path.
///
/// A value below zero certifies empirical invertibility of `theta` on this
/// sample. The standard error comes from batch means (about sqrt(n) batches)
/// because the summands are serially dependent through the volatility.
pub fn empirical_lyapunov(theta: &ParamVector, path: &Path) -> Result<LyapunovReport> {
    empirical_lyapunov_for(path.model, theta, &path.x)
}

/// As [`empirical_lyapunov`], on a raw observation slice.
pub fn empirical_lyapunov_for(
    model: ModelKind,
    theta: &ParamVector,
    x: &[f64],
) -> Result<LyapunovReport> {
    theta.validate(model)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput("empirical Lyapunov needs n >= 2".into()));
    }
    let terms: Vec<f64> = x.iter().map(|&xt| lipschitz_coeff(model, theta, xt).ln()).collect();
    let neg_infinity = terms.iter().any(|v| v.is_infinite());
    if neg_infinity {
        return Ok(LyapunovReport {
            value: f64::NEG_INFINITY,
            std_error: 0.0,
            n_or_m: n,
            kind: LyapunovKind::EmpiricalOnData,
            neg_infinity: true,
            tail_bound: None,
        });
    }
    let mean = terms.iter().sum::<f64>() / n as f64;
    let std_error = batch_means_se(&terms, mean);
    Ok(LyapunovReport {
        value: mean,
        std_error,
        n_or_m: n,
        kind: LyapunovKind::EmpiricalOnData,
        neg_infinity: false,
        tail_bound: None,
    })
}

fn batch_means_se(terms: &[f64], mean: f64) -> f64 {
    let n = terms.len();
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 {
        return 0.0;
    }
    let len = n / b;
    let mut var = 0.0;
    for i in 0..b {
        let batch = &terms[i * len..(i + 1) * len];
        let bm = batch.iter().sum::<f64>() / len as f64;
        var += (bm - mean) * (bm - mean);
    }
    (var / (b as f64 * (b - 1) as f64)).sqrt()
}

/// Monte Carlo estimate of the model-implied invertibility exponent at
/// `theta0` (EGARCH), with the volatility replaced by its MA(infinity)
/// expansion truncated at `trunc` terms.
pub fn model_implied_lyapunov(
    theta0: &ParamVector,
    dist: &InnovationDist,
    m: usize,
    trunc: usize,
    seed: u64,
) -> Result<LyapunovReport> {
    theta0.validate(ModelKind::Egarch11)?;
    if m == 0 || trunc == 0 {
        return Err(Error::InvalidInput("m and trunc must be positive".into()));
    }
    let (beta, gamma, delta) = (theta0.beta, theta0.gamma, theta0.delta);
    let mut rng = split_stream(seed, 0);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut neg_infinity = false;
    for _ in 0..m {
        let z0 = dist.sample(&mut rng);
        // inner series sum_{k=0}^{trunc-1} beta^k W_{-k-1}
        let mut inner = 0.0;
        let mut bk = 1.0;
        for _ in 0..trunc {
            let z = dist.sample(&mut rng);
            inner += bk * (gamma * z + delta * z.abs());
            bk *= beta;
        }
        let w0 = gamma * z0 + delta * z0.abs();
        let lam = beta.max(0.5 * (0.5 * inner).exp() * w0 - beta);
        let v = lam.ln();
        if v.is_infinite() {
            neg_infinity = true;
            continue;
        }
        sum += v;
        sum2 += v * v;
    }
    let e_absz = dist.e_absz()?;
    let e_absw_bound = (gamma.abs() + delta) * e_absz;
    let tail = beta.powi(trunc as i32) * e_absw_bound / (1.0 - beta);
    if neg_infinity {
        return Ok(LyapunovReport {
            value: f64::NEG_INFINITY,
            std_error: 0.0,
            n_or_m: m,
            kind: LyapunovKind::ModelImpliedMC,
            neg_infinity: true,
            tail_bound: Some(tail),
        });
    }
    let mean = sum / m as f64;
    let var = (sum2 / m as f64 - mean * mean).max(0.0);
    Ok(LyapunovReport {
        value: mean,
        std_error: (var / m as f64).sqrt(),
        n_or_m: m,
        kind: LyapunovKind::ModelImpliedMC,
        neg_infinity: false,
        tail_bound: Some(tail),
    })
}

/// One row of a region scan.
#[derive(Debug, Clone, Serialize)]
pub struct RegionPoint {
    pub theta: ParamVector,
    pub report: LyapunovReport,
}

/// Evaluates the model-implied exponent on a per-axis grid over `bx`.
///
/// For GARCH the exponent is exactly `log beta` (constant Lipschitz
/// coefficient), reported with zero standard error.
pub fn region_scan(
    model: ModelKind,
    bx: &ParamBox,
    grid: &[usize],
    dist: &InnovationDist,
    m: usize,
    trunc: usize,
    seed: u64,
) -> Result<Vec<RegionPoint>> {
    if grid.len() != bx.dim() {
        return Err(Error::InvalidInput("grid length must match box dimension".into()));
    }
    if grid.iter().any(|&c| c == 0) {
        return Err(Error::InvalidInput("grid counts must be positive".into()));
    }
    let axes: Vec<Vec<f64>> = grid
        .iter()
        .zip(bx.lower.iter().zip(&bx.upper))
        .map(|(&c, (&l, &u))| linspace(l, u, c))
        .collect();
    let mut points = Vec::new();
    let mut idx = vec![0usize; axes.len()];
    let mut flat = 0u64;
    loop {
        let coords: Vec<f64> = idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect();
        let theta = ParamVector::from_slice(model, &coords);
        let report = match model {
            ModelKind::Garch11 => {
                theta.validate(model)?;
                LyapunovReport {
                    value: theta.beta.ln(),
                    std_error: 0.0,
                    n_or_m: m,
                    kind: LyapunovKind::ModelImpliedMC,
                    neg_infinity: theta.beta == 0.0,
                    tail_bound: Some(0.0),
                }
            }
            ModelKind::Egarch11 => model_implied_lyapunov(&theta, dist, m, trunc, seed ^ flat)?,
        };
        points.push(RegionPoint { theta, report });
        flat += 1;
        // odometer increment
        let mut k = axes.len();
        loop {
            if k == 0 {
                return Ok(points);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn linspace(l: f64, u: f64, c: usize) -> Vec<f64> {
    if c == 1 {
        return vec![l];
    }
    (0..c).map(|i| l + (u - l) * i as f64 / (c - 1) as f64).collect()
}

/// CSV dump of a region scan: `alpha,beta,gamma,delta,value,se`.
pub fn write_region_csv<W: Write>(points: &[RegionPoint], mut w: W) -> Result<()> {
    writeln!(w, "alpha,beta,gamma,delta,value,se")?;
    for p in points {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.theta.alpha, p.theta.beta, p.theta.gamma, p.theta.delta,
            p.report.value, p.report.std_error
        )?;
    }
    Ok(())
}
