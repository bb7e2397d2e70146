//! Asymptotic variance of the constrained QLIK estimator (EGARCH scope).
//!
//! With `g_t = log sigma^2_t`, the score/curvature matrix is
//! `B = E[grad g_t grad g_t^T]` where the gradient satisfies
//!
//! `grad g_t = U_{t-1} + V_{t-1} grad g_{t-1}`,
//! `U_t = (1, log sigma^2_t, Z_t, |Z_t|)`,
//! `V_t = beta0 - (gamma0 Z_t + delta0 |Z_t|) / 2`,
//!
//! so `P = B/2`, `Q = (E Z^4 - 1) B / 4` and the sandwich collapses to
//! `V = (E Z^4 - 1) B^{-1}`. The series for `grad g_t` converges in L2 under
//! (MM'): `E Z^4 < infinity` and `E V_0^2 < 1`.
//!
//! Diagonal closed forms (v = E V, m2 = E V^2, c = (alpha + 2 beta)/(1 - beta),
//! and `A = sum_l prod_{k<l} V_{t-k}`, `S = sum_l (sum_k beta^{k-1} V_{t-l-k})
//! prod_{k<l} V_{t-k}`):
//!
//! - `B11 = E A^2 = 2v/((1-m2)(1-v)) + 1/(1-m2)`
//! - `B22 = E (cA - 2S)^2 = c^2 B11 + 4 E[S^2] - 4c E[A S]`
//! - `B33 = E Z^2 / (1-m2)`
//! - `B44 = 2 E|Z| E(|Z|V) / ((1-v)(1-m2)) + 1/(1-m2)`
//!
//! with
//!
//! - `E[A S] = [v/(1-v) + m2 (1/(1-v) - 1/(1-bv)) + v^2/(1-bv)]
//!   / ((1-b)(1-m2))` (b = beta, bv = beta * v),
//! - `E[S^2] = D + 2 (P1 + P2)/(1-m2)` where
//!   `D = [m2/(1-b^2) + 2 v^2 b/((1-b)(1-b^2))]/(1-m2)`,
//!   `P1 = [m2 v/(1-v) - m2 v/(1-bv) + v^3/(1-bv)]/(1-b)^2`,
//!   `P2 = (m2 - v^2) b v/((1-b^2)(1-bv))`.

use nalgebra::{Matrix3, Matrix4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::InnovationDist;
use crate::error::{Error, Result};
use crate::models::{ModelKind, ParamVector};
use crate::rng::rep_stream;
use crate::simulate::{simulate, DEFAULT_BURN_IN};

/// Innovation moments entering the EGARCH closed forms, computed by
/// quadrature at tolerance [`crate::dist::QUAD_TOL`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnovationMoments {
    pub e_absz: f64,
    pub e_z4: f64,
    /// E V with V = beta - (gamma Z + delta |Z|)/2.
    pub e_v: f64,
    pub e_v2: f64,
    pub e_absz_v: f64,
}

impl InnovationMoments {
    pub fn compute(theta: &ParamVector, dist: &InnovationDist) -> Result<Self> {
        theta.validate(ModelKind::Egarch11)?;
        let (beta, gamma, delta) = (theta.beta, theta.gamma, theta.delta);
        let v = move |z: f64| beta - (gamma * z + delta * z.abs()) / 2.0;
        Ok(InnovationMoments {
            e_absz: dist.e_absz()?,
            e_z4: dist.e_z4()?,
            e_v: dist.expect(|z| v(z))?,
            e_v2: dist.expect(|z| v(z) * v(z))?,
            e_absz_v: dist.expect(|z| z.abs() * v(z))?,
        })
    }
}

/// Checks the moment condition (MM'): `E Z^4 < infinity` and `E V_0^2 < 1`.
///
/// Returns `(holds, margin)` with `margin = 1 - E V_0^2`; a fourth moment
/// that does not exist fails the condition regardless of the margin.
pub fn check_mm_prime(theta: &ParamVector, dist: &InnovationDist) -> Result<(bool, f64)> {
    theta.validate(ModelKind::Egarch11)?;
    let (beta, gamma, delta) = (theta.beta, theta.gamma, theta.delta);
    let e_v2 = dist.expect(|z| {
        let v = beta - (gamma * z + delta * z.abs()) / 2.0;
        v * v
    })?;
    let margin = 1.0 - e_v2;
    let fourth_exists = dist.e_z4().is_ok();
    Ok((fourth_exists && margin > 0.0, margin))
}

/// Closed-form diagonal of B at `theta0` (EGARCH). Requires (MM').
pub fn b_diag_closed_form(theta0: &ParamVector, dist: &InnovationDist) -> Result<[f64; 4]> {
    let mom = InnovationMoments::compute(theta0, dist)?;
    let (alpha, beta) = (theta0.alpha, theta0.beta);
    let (v, m2) = (mom.e_v, mom.e_v2);
    let bv = beta * v;
    for (name, d) in
        [("1 - E V^2", 1.0 - m2), ("1 - E V", 1.0 - v), ("1 - beta E V", 1.0 - bv), ("1 - beta", 1.0 - beta)]
    {
        if d <= 1e-10 {
            return Err(Error::NearSingularMoments(format!("{name} = {d:.3e}")));
        }
    }

    let b11 = 2.0 * v / ((1.0 - m2) * (1.0 - v)) + 1.0 / (1.0 - m2);
    let b33 = dist.expect(|z| z * z)? / (1.0 - m2);
    let b44 = 2.0 * mom.e_absz * mom.e_absz_v / ((1.0 - v) * (1.0 - m2)) + 1.0 / (1.0 - m2);

    let c = (alpha + 2.0 * beta) / (1.0 - beta);
    let e_as = (v / (1.0 - v) + m2 * (1.0 / (1.0 - v) - 1.0 / (1.0 - bv)) + v * v / (1.0 - bv))
        / ((1.0 - beta) * (1.0 - m2));
    let diag = (m2 / (1.0 - beta * beta)
        + 2.0 * v * v * beta / ((1.0 - beta) * (1.0 - beta * beta)))
        / (1.0 - m2);
    let part1 = (m2 * v / (1.0 - v) - m2 * v / (1.0 - bv) + v * v * v / (1.0 - bv))
        / ((1.0 - beta) * (1.0 - beta));
    let part2 = (m2 - v * v) * bv / ((1.0 - beta * beta) * (1.0 - bv));
    let e_s2 = diag + 2.0 * (part1 + part2) / (1.0 - m2);
    let b22 = c * c * b11 + 4.0 * e_s2 - 4.0 * c * e_as;

    Ok([b11, b22, b33, b44])
}

/// Monte Carlo estimate of the full 4x4 matrix B.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BMatrixMc {
    pub b: [[f64; 4]; 4],
    pub se: [[f64; 4]; 4],
    pub m: usize,
    pub trunc: usize,
    /// L2 truncation-tail factor `(E V^2)^trunc` of the gradient series.
    pub tail_bound: f64,
}

struct RepAccum {
    sum: [[f64; 4]; 4],
    sum_sq: [[f64; 4]; 4],
}

impl RepAccum {
    fn zero() -> Self {
        RepAccum { sum: [[0.0; 4]; 4], sum_sq: [[0.0; 4]; 4] }
    }
    fn add(&mut self, g: &[f64; 4]) {
        for i in 0..4 {
            for j in 0..4 {
                let p = g[i] * g[j];
                self.sum[i][j] += p;
                self.sum_sq[i][j] += p * p;
            }
        }
    }
    fn merge(mut self, other: RepAccum) -> Self {
        for i in 0..4 {
            for j in 0..4 {
                self.sum[i][j] += other.sum[i][j];
                self.sum_sq[i][j] += other.sum_sq[i][j];
            }
        }
        self
    }
}

/// One gradient draw: innovations `z[0] = Z_{t-1}, z[1] = Z_{t-2}, ...` with
/// both the gradient recursion and the inner log-volatility MA series
/// truncated at `l` terms (so `2l` innovations per draw).
fn gradient_draw(theta0: &ParamVector, z: &[f64], l: usize) -> [f64; 4] {
    let (alpha, beta, gamma, delta) = (theta0.alpha, theta0.beta, theta0.gamma, theta0.delta);
    let w: Vec<f64> = z.iter().map(|&zt| gamma * zt + delta * zt.abs()).collect();

    // inner[j] = sum_{k=0}^{l-1} beta^k w[j+k] for j = 1..=l, backward
    // recurrence inner[j] = w[j] + beta * inner[j+1] - beta^l * w[j+l]
    let beta_l = beta.powi(l as i32);
    let mut inner = vec![0.0; l + 1];
    inner[l] = (0..l).rev().fold(0.0, |acc, k| acc * beta + w[l + k]);
    for j in (1..l).rev() {
        inner[j] = w[j] + beta * inner[j + 1] - beta_l * w[j + l];
    }

    let base = alpha / (1.0 - beta);
    let mut g = [0.0; 4];
    let mut prod = 1.0;
    for j in 0..l {
        let ls = base + inner[j + 1]; // log sigma^2 at lag j+1
        g[0] += prod;
        g[1] += ls * prod;
        g[2] += z[j] * prod;
        g[3] += z[j].abs() * prod;
        prod *= beta - w[j] / 2.0;
    }
    g
}

/// Monte Carlo B at `theta0` (EGARCH): `m` independent gradient draws, each
/// truncated at `trunc` lags. Entry-wise standard errors are the iid
/// formula over draws.
pub fn b_matrix_mc(
    theta0: &ParamVector,
    dist: &InnovationDist,
    m: usize,
    trunc: usize,
    seed: u64,
) -> Result<BMatrixMc> {
    theta0.validate(ModelKind::Egarch11)?;
    if m < 2 || trunc < 1 {
        return Err(Error::InvalidInput("b_matrix_mc needs m >= 2 and trunc >= 1".into()));
    }
    // chunked so the float accumulation order is fixed regardless of how
    // rayon schedules the chunks
    const CHUNK: usize = 4096;
    let partials: Vec<RepAccum> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = RepAccum::zero();
            for rep in c * CHUNK..(((c + 1) * CHUNK).min(m)) {
                let mut rng = rep_stream(seed, rep as u64);
                let z: Vec<f64> = (0..2 * trunc).map(|_| dist.sample(&mut rng)).collect();
                acc.add(&gradient_draw(theta0, &z, trunc));
            }
            acc
        })
        .collect();
    let acc = partials.into_iter().fold(RepAccum::zero(), RepAccum::merge);

    let mut b = [[0.0; 4]; 4];
    let mut se = [[0.0; 4]; 4];
    let mf = m as f64;
    for i in 0..4 {
        for j in 0..4 {
            let mean = acc.sum[i][j] / mf;
            b[i][j] = mean;
            se[i][j] = ((acc.sum_sq[i][j] / mf - mean * mean).max(0.0) / mf).sqrt();
        }
    }
    let mom = InnovationMoments::compute(theta0, dist)?;
    Ok(BMatrixMc { b, se, m, trunc, tail_bound: mom.e_v2.powi(trunc as i32) })
}

/// MC estimates of `B11` truncated at each length in `truncs`, with shared
/// randomness across truncation lengths. Under (MM') the values stabilize;
/// when `E V^2 > 1` they grow without bound, which is the practical
/// divergence diagnostic.
pub fn b11_partial_sums(
    theta0: &ParamVector,
    dist: &InnovationDist,
    m: usize,
    truncs: &[usize],
    seed: u64,
) -> Result<Vec<f64>> {
    theta0.validate(ModelKind::Egarch11)?;
    let max_l = *truncs.iter().max().ok_or_else(|| {
        Error::InvalidInput("b11_partial_sums needs at least one truncation length".into())
    })?;
    let (beta, gamma, delta) = (theta0.beta, theta0.gamma, theta0.delta);
    const CHUNK: usize = 4096;
    let partials: Vec<Vec<f64>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; truncs.len()];
            for rep in c * CHUNK..(((c + 1) * CHUNK).min(m)) {
                let mut rng = rep_stream(seed, rep as u64);
                let mut prod = 1.0f64;
                let mut a = 0.0f64;
                for l in 1..=max_l {
                    a += prod;
                    let z = dist.sample(&mut rng);
                    prod *= beta - (gamma * z + delta * z.abs()) / 2.0;
                    for (k, &t) in truncs.iter().enumerate() {
                        if t == l {
                            acc[k] += a * a;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut sums = vec![0.0; truncs.len()];
    for p in partials {
        for (x, y) in sums.iter_mut().zip(p) {
            *x += y;
        }
    }
    Ok(sums.into_iter().map(|s| s / m as f64).collect())
}

/// Asymptotic covariance report: `P = B/2`, `Q = (E Z^4 - 1) B / 4`,
/// `V = P^{-1} Q P^{-1} = (E Z^4 - 1) B^{-1}`, `se_i = sqrt(V_ii / n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub b: [[f64; 4]; 4],
    pub p: [[f64; 4]; 4],
    pub q: [[f64; 4]; 4],
    pub v: [[f64; 4]; 4],
    pub se: [f64; 4],
    pub e_z4: f64,
    pub n: usize,
}

fn to_array4(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

pub fn asymptotic_variance(b: &[[f64; 4]; 4], e_z4: f64, n: usize) -> Result<AsymptoticReport> {
    if n == 0 || !e_z4.is_finite() || e_z4 <= 1.0 {
        return Err(Error::InvalidInput("asymptotic_variance needs n >= 1 and E Z^4 > 1".into()));
    }
    let bm = Matrix4::from_fn(|i, j| b[i][j]);
    let chol = nalgebra::Cholesky::new(bm).ok_or(Error::NotPositiveDefinite)?;
    let b_inv = chol.inverse();
    let p = bm / 2.0;
    let q = bm * ((e_z4 - 1.0) / 4.0);
    let v = b_inv * (e_z4 - 1.0);
    // internal consistency: the sandwich must collapse to (EZ^4 - 1) B^{-1}
    let p_inv = b_inv * 2.0;
    debug_assert!((p_inv * q * p_inv - v).norm() <= 1e-10 * v.norm().max(1.0));
    let mut se = [0.0; 4];
    for (i, s) in se.iter_mut().enumerate() {
        *s = (v[(i, i)] / n as f64).sqrt();
    }
    Ok(AsymptoticReport {
        b: *b,
        p: to_array4(&p),
        q: to_array4(&q),
        v: to_array4(&v),
        se,
        e_z4,
        n,
    })
}

/// GARCH sandwich by simulation: `V = (E Z^4 - 1) J^{-1}` with
/// `J = E[grad sigma^2 grad sigma^2^T / sigma^4]` estimated along one long
/// simulated path via `grad sigma^2_t = (1, sigma^2_{t-1}, X^2_{t-1})
/// + beta grad sigma^2_{t-1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GarchSandwichMc {
    pub v: [[f64; 3]; 3],
    pub se: [f64; 3],
    pub e_z4: f64,
    pub n_path: usize,
    pub n: usize,
}

pub fn garch_sandwich_mc(
    theta0: &ParamVector,
    dist: &InnovationDist,
    n_path: usize,
    n: usize,
    seed: u64,
) -> Result<GarchSandwichMc> {
    theta0.validate(ModelKind::Garch11)?;
    if n_path < 1000 {
        return Err(Error::InvalidInput("garch_sandwich_mc needs n_path >= 1000".into()));
    }
    let path = simulate(ModelKind::Garch11, theta0, dist, n_path, DEFAULT_BURN_IN, seed)?;
    let sigma2 = path.sigma2.as_ref().expect("simulated path carries sigma2");
    let (alpha, beta, gamma) = (theta0.alpha, theta0.beta, theta0.gamma);

    let skip = 200;
    let mut grad = [0.0f64; 3];
    let mut g = sigma2[0];
    let mut j = Matrix3::zeros();
    let mut used = 0usize;
    for t in 1..n_path {
        let x2 = path.x[t - 1] * path.x[t - 1];
        let u = [1.0, g, x2];
        for k in 0..3 {
            grad[k] = u[k] + beta * grad[k];
        }
        g = alpha + beta * g + gamma * x2;
        if t >= skip {
            let w = 1.0 / (g * g);
            for a in 0..3 {
                for b in 0..3 {
                    j[(a, b)] += grad[a] * grad[b] * w;
                }
            }
            used += 1;
        }
    }
    j /= used as f64;
    let e_z4 = dist.e_z4()?;
    let chol = nalgebra::Cholesky::new(j).ok_or(Error::NotPositiveDefinite)?;
    let v = chol.inverse() * (e_z4 - 1.0);
    let mut varr = [[0.0; 3]; 3];
    let mut se = [0.0; 3];
    for a in 0..3 {
        for b in 0..3 {
            varr[a][b] = v[(a, b)];
        }
        se[a] = (v[(a, a)] / n as f64).sqrt();
    }
    Ok(GarchSandwichMc { v: varr, se, e_z4, n_path, n })
}
