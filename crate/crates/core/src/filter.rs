//! Observation-driven SRE filter, QLIK criterion and volatility forecasts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{link, sre_step, ModelKind, ParamVector};
use crate::simulate::Path;

/// Divergence threshold for the EGARCH pre-exponential state; beyond this,
/// `exp(g/2)` would leave double precision and the trajectory is flagged
/// divergent (a non-invertible theta on this data) instead of going
/// non-finite.
pub const EGARCH_DIVERGENCE: f64 = 700.0;
pub const GARCH_DIVERGENCE: f64 = 1e300;

/// Default criterion burn: the e.a.s.-forgotten prefix excluded from QLIK.
pub const DEFAULT_BURN: usize = 50;

/// The filter output `g_hat_1(theta) .. g_hat_n(theta)`.
///
/// Indexing: `g[t]` is the state paired with observation `x[t]`; the first
/// state comes from one recursion step on the (clamped) initial value with
/// the unobserved pre-sample observation set to zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterTrajectory {
    pub g: Vec<f64>,
    pub theta: ParamVector,
    pub model: ModelKind,
    pub g_init: f64,
    pub burn: usize,
    /// Index at which the recursion first crossed the divergence guard.
    pub diverged_at: Option<usize>,
}

impl FilterTrajectory {
    pub fn is_divergent(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// In-sample variance estimates `link(g_t)`.
    pub fn sigma2_hat(&self) -> Vec<f64> {
        self.g.iter().map(|&g| link(self.model, g)).collect()
    }

    /// CSV export, header `t,g,sigma2_hat`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,g,sigma2_hat")?;
        for (t, &g) in self.g.iter().enumerate() {
            writeln!(w, "{},{:.16e},{:.16e}", t + 1, g, link(self.model, g))?;
        }
        Ok(())
    }
}

/// QLIK criterion value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QlikValue {
    pub value: f64,
    pub n_effective: usize,
}

/// Default initial state: the EGARCH state-space floor (which makes the
/// clamp a no-op), equal to `alpha/(1-beta)` for both models.
pub fn default_g_init(theta: &ParamVector) -> f64 {
    theta.state_floor()
}

/// Runs the SRE filter from `g_init` over the observations.
pub fn run_filter(
    model: ModelKind,
    theta: &ParamVector,
    path: &Path,
    g_init: f64,
) -> Result<FilterTrajectory> {
    run_filter_x(model, theta, &path.x, g_init)
}

/// As [`run_filter`], on a raw observation slice.
pub fn run_filter_x(
    model: ModelKind,
    theta: &ParamVector,
    x: &[f64],
    g_init: f64,
) -> Result<FilterTrajectory> {
    theta.validate(model)?;
    if x.is_empty() {
        return Err(Error::InvalidInput("path is empty".into()));
    }
    let guard = match model {
        ModelKind::Egarch11 => EGARCH_DIVERGENCE,
        ModelKind::Garch11 => GARCH_DIVERGENCE,
    };
    let init = match model {
        ModelKind::Egarch11 => g_init.max(theta.state_floor()),
        ModelKind::Garch11 => g_init.max(0.0),
    };
    let mut g = Vec::with_capacity(x.len());
    let mut diverged_at = None;
    let mut state = sre_step(model, theta, init, 0.0)?;
    for t in 0..x.len() {
        if state.abs() > guard || !state.is_finite() {
            diverged_at = Some(t);
            state = state.clamp(-guard, guard);
            g.resize(x.len(), state);
            break;
        }
        g.push(state);
        if t + 1 < x.len() {
            state = sre_step(model, theta, state, x[t])?;
        }
    }
    Ok(FilterTrajectory { g, theta: *theta, model, g_init, burn: DEFAULT_BURN, diverged_at })
}

/// Mean QLIK loss over `t in (burn, n]`; divergent trajectories order worst
/// at +infinity.
pub fn qlik(
    model: ModelKind,
    theta: &ParamVector,
    path: &Path,
    g_init: f64,
    burn: usize,
) -> Result<QlikValue> {
    qlik_x(model, theta, &path.x, g_init, burn)
}

/// As [`qlik`], on a raw observation slice.
pub fn qlik_x(
    model: ModelKind,
    theta: &ParamVector,
    x: &[f64],
    g_init: f64,
    burn: usize,
) -> Result<QlikValue> {
    let n = x.len();
    if n <= burn {
        return Err(Error::InvalidInput(format!("need n > burn, got n={n} burn={burn}")));
    }
    let traj = run_filter_x(model, theta, x, g_init)?;
    Ok(qlik_of_trajectory(&traj, x, burn))
}

/// Criterion evaluation on an existing trajectory.
pub fn qlik_of_trajectory(traj: &FilterTrajectory, x: &[f64], burn: usize) -> QlikValue {
    let n = x.len();
    let n_effective = n - burn;
    if traj.is_divergent() {
        return QlikValue { value: f64::INFINITY, n_effective };
    }
    let mut sum = 0.0;
    match traj.model {
        ModelKind::Egarch11 => {
            for t in burn..n {
                let g = traj.g[t];
                sum += 0.5 * (x[t] * x[t] * (-g).exp() + g);
            }
        }
        ModelKind::Garch11 => {
            for t in burn..n {
                let v = traj.g[t];
                if v <= 0.0 {
                    return QlikValue { value: f64::INFINITY, n_effective };
                }
                sum += 0.5 * (x[t] * x[t] / v + v.ln());
            }
        }
    }
    let value = sum / n_effective as f64;
    QlikValue { value: if value.is_nan() { f64::INFINITY } else { value }, n_effective }
}

/// Forecast output: in-sample variance estimates and the one-step-ahead
/// value `link(phi(g_n; X_n))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forecast {
    pub sigma2_hat: Vec<f64>,
    pub next: f64,
    pub divergent: bool,
}

/// In-sample `sigma2_hat_t = link(g_t(theta))` plus the next-step forecast.
pub fn forecast(model: ModelKind, fit_theta: &ParamVector, path: &Path) -> Result<Forecast> {
    let traj = run_filter(model, fit_theta, path, default_g_init(fit_theta))?;
    let n = path.len();
    let next_state = sre_step(model, fit_theta, traj.g[n - 1], path.x[n - 1])?;
    Ok(Forecast {
        sigma2_hat: traj.sigma2_hat(),
        next: link(model, next_state),
        divergent: traj.is_divergent(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::InnovationDist;
    use crate::invertibility::empirical_lyapunov;
    use crate::simulate::simulate;

    fn normal() -> InnovationDist {
        InnovationDist::StdNormal
    }

    fn path_of(x: Vec<f64>, model: ModelKind) -> Path {
        Path::from_observations(model, x)
    }

    #[test]
    fn one_step_forgetting_intercept_only() {
        let theta = ParamVector::egarch(1.7, 0.0, 0.0, 0.0);
        let p = path_of(vec![0.4, -2.0, 3.0, 0.0], ModelKind::Egarch11);
        for g_init in [-5.0, 1.7, 40.0] {
            let traj = run_filter(ModelKind::Egarch11, &theta, &p, g_init).unwrap();
            for &g in &traj.g {
                assert_eq!(g, 1.7);
            }
        }
    }

    #[test]
    fn garch_intercept_only() {
        let theta = ParamVector::garch(1.0, 0.0, 0.0);
        let p = path_of(vec![1.0, 2.0, 3.0], ModelKind::Garch11);
        let traj = run_filter(ModelKind::Garch11, &theta, &p, 5.0).unwrap();
        assert_eq!(traj.g, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn qlik_trivial_cases() {
        // GARCH, g == 1, X == 0 -> 0
        let theta = ParamVector::garch(1.0, 0.0, 0.0);
        let p = path_of(vec![0.0; 20], ModelKind::Garch11);
        let q = qlik(ModelKind::Garch11, &theta, &p, 1.0, 0).unwrap();
        assert_eq!(q.value, 0.0);

        // EGARCH all-zero theta: value = mean(X^2)/2
        let theta = ParamVector::egarch(0.0, 0.0, 0.0, 0.0);
        let x = vec![1.0, -2.0, 0.5];
        let mean_x2: f64 = x.iter().map(|v| v * v).sum::<f64>() / 3.0;
        let p = path_of(x, ModelKind::Egarch11);
        let q = qlik(ModelKind::Egarch11, &theta, &p, 0.0, 0).unwrap();
        assert!((q.value - 0.5 * mean_x2).abs() < 1e-15);
    }

    // two initial values on an invertible theta agree by t = 200
    #[test]
    fn filter_forgets_initial_value() {
        let theta = ParamVector::egarch(0.0, 0.5, -0.1, 0.3);
        let p = simulate(ModelKind::Egarch11, &theta, &normal(), 2000, 500, 13).unwrap();
        let floor = theta.state_floor();
        let a = run_filter(ModelKind::Egarch11, &theta, &p, floor).unwrap();
        let b = run_filter(ModelKind::Egarch11, &theta, &p, floor + 10.0).unwrap();
        let max_gap = a.g[200..]
            .iter()
            .zip(&b.g[200..])
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(max_gap < 1e-10, "max gap {max_gap}");
    }

    // the two-filter log-gap decays at least as fast as the empirical
    // Lyapunov exponent certifies (the Lipschitz coefficient over-bounds the
    // pointwise contraction, so faster decay is expected)
    #[test]
    fn forgetting_rate_matches_lyapunov() {
        let theta = ParamVector::egarch(0.0, 0.5, -0.1, 0.3);
        let p = simulate(ModelKind::Egarch11, &theta, &normal(), 400, 500, 29).unwrap();
        let floor = theta.state_floor();
        let a = run_filter(ModelKind::Egarch11, &theta, &p, floor).unwrap();
        let b = run_filter(ModelKind::Egarch11, &theta, &p, floor + 10.0).unwrap();
        let pairs: Vec<(f64, f64)> = a
            .g
            .iter()
            .zip(&b.g)
            .enumerate()
            .map(|(t, (x, y))| (t as f64, (x - y).abs()))
            .take_while(|&(_, gap)| gap > 1e-12) // stop before f64 quantization flattens the decay
            .map(|(t, gap)| (t, gap.ln()))
            .collect();
        let n = pairs.len() as f64;
        let (sx, sy): (f64, f64) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let sxy: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pairs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!(slope < 0.0, "slope {slope}");
        let lyap = empirical_lyapunov(&theta, &p).unwrap().value;
        assert!(lyap < 0.0);
        assert!(slope <= lyap + 0.1, "slope {slope} lyapunov {lyap}");
    }

    // on zero inputs each loss term is bounded below by alpha/(2(1-beta))
    #[test]
    fn qlik_lower_bound_on_zero_inputs() {
        let theta = ParamVector::egarch(0.8, 0.6, -0.1, 0.3);
        let p = path_of(vec![0.0; 50], ModelKind::Egarch11);
        let q = qlik(ModelKind::Egarch11, &theta, &p, 5.0, 0).unwrap();
        assert!(q.value >= 0.5 * theta.state_floor() - 1e-12);
    }

    // qlik at theta0 converges to (1 + E log sigma^2)/2
    #[test]
    fn qlik_stationary_mean_oracle() {
        let theta = ParamVector::egarch(0.0, 0.5, 0.0, 0.3);
        let n = 1_000_000;
        let p = simulate(ModelKind::Egarch11, &theta, &normal(), n, 2000, 31).unwrap();
        let q = qlik(ModelKind::Egarch11, &theta, &p, theta.state_floor(), 50).unwrap();
        let e_log_s2 = theta.delta * (2.0 / std::f64::consts::PI).sqrt() / (1.0 - theta.beta);
        let target = 0.5 * (1.0 + e_log_s2);
        // batch-means SE of the dependent loss terms
        let traj = run_filter(ModelKind::Egarch11, &theta, &p, theta.state_floor()).unwrap();
        let terms: Vec<f64> = (50..n)
            .map(|t| 0.5 * (p.x[t] * p.x[t] * (-traj.g[t]).exp() + traj.g[t]))
            .collect();
        let b = (terms.len() as f64).sqrt() as usize;
        let len = terms.len() / b;
        let mean = q.value;
        let var: f64 = (0..b)
            .map(|i| {
                let bm = terms[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64;
                (bm - mean) * (bm - mean)
            })
            .sum();
        let se = (var / (b as f64 * (b - 1) as f64)).sqrt();
        assert!((q.value - target).abs() < 4.0 * se, "qlik {} target {target} se {se}", q.value);
    }

    // criterion identifiability at desk scale: theta0 beats a coarse grid
    #[test]
    fn qlik_identifiable_on_coarse_grid() {
        let theta0 = ParamVector::egarch(0.0, 0.5, -0.1, 0.3);
        let p = simulate(ModelKind::Egarch11, &theta0, &normal(), 100_000, 2000, 37).unwrap();
        let q0 = qlik(ModelKind::Egarch11, &theta0, &p, theta0.state_floor(), 50).unwrap().value;
        let mut rivals = Vec::new();
        for d in [-0.15, 0.15] {
            rivals.push(ParamVector::egarch(theta0.alpha + d, theta0.beta, theta0.gamma, theta0.delta));
            rivals.push(ParamVector::egarch(theta0.alpha, (theta0.beta + d).clamp(0.0, 0.99), theta0.gamma, theta0.delta));
            let g = theta0.gamma + d;
            rivals.push(ParamVector::egarch(theta0.alpha, theta0.beta, g, theta0.delta.max(g.abs())));
            let dd = (theta0.delta + d).max(theta0.gamma.abs());
            rivals.push(ParamVector::egarch(theta0.alpha, theta0.beta, theta0.gamma, dd));
        }
        for r in rivals {
            let q = qlik(ModelKind::Egarch11, &r, &p, r.state_floor(), 50).unwrap().value;
            assert!(q0 < q, "theta0 {q0} not below rival {r:?} at {q}");
        }
    }

    #[test]
    fn divergent_theta_is_flagged_not_nan() {
        // huge delta, beta near 1: the filter explodes on a volatile path
        let theta0 = ParamVector::egarch(0.0, 0.5, 0.0, 0.5);
        let p = simulate(ModelKind::Egarch11, &theta0, &normal(), 3000, 500, 41).unwrap();
        let bad = ParamVector::egarch(-3.0, 0.0, 0.0, 5.0);
        let traj = run_filter(ModelKind::Egarch11, &bad, &p, bad.state_floor()).unwrap();
        if traj.is_divergent() {
            assert!(traj.g.iter().all(|g| g.is_finite()));
            let q = qlik_of_trajectory(&traj, &p.x, 50);
            assert_eq!(q.value, f64::INFINITY);
        }
    }

    #[test]
    fn forecast_trivial_cases() {
        let theta = ParamVector::egarch(0.0, 0.0, 0.0, 0.0);
        let p = path_of(vec![0.3, -0.2, 1.0], ModelKind::Egarch11);
        let f = forecast(ModelKind::Egarch11, &theta, &p).unwrap();
        assert!(f.sigma2_hat.iter().all(|&s| s == 1.0));
        assert_eq!(f.next, 1.0);

        let theta = ParamVector::garch(1.0, 0.0, 0.0);
        let p = path_of(vec![0.3, -0.2, 1.0], ModelKind::Garch11);
        let f = forecast(ModelKind::Garch11, &theta, &p).unwrap();
        assert!(f.sigma2_hat.iter().all(|&s| s == 1.0));
        assert_eq!(f.next, 1.0);
    }
}
