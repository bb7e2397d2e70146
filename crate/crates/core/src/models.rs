//! The two volatility models as finite-lag SRE map families.
//!
//! Both models are driven by a one-step recursion on a scalar state:
//!
//! - GARCH(1,1): `g_t = alpha + beta g_{t-1} + gamma X_{t-1}^2` with the
//!   identity link, state `g = sigma^2`.
//! - EGARCH(1,1): `g_t = alpha + beta g_{t-1} + (gamma X_{t-1} + delta
//!   |X_{t-1}|) exp(-g_{t-1}/2)` with the exponential link, state
//!   `g = log sigma^2`, restricted to `[alpha/(1-beta), infinity)`.
//!
//! The innovation term of the EGARCH map uses the convention
//! `W = gamma * (signed) + delta * (absolute)` with `delta >= |gamma|`, the
//! only ordering under which the restricted state space is invariant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Garch11,
    Egarch11,
}

impl ModelKind {
    /// Number of free parameters.
    pub fn dim(&self) -> usize {
        match self {
            ModelKind::Garch11 => 3,
            ModelKind::Egarch11 => 4,
        }
    }
}

/// Model parameter `theta`.
///
/// `delta` is unused for GARCH(1,1), where `gamma` multiplies `X^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl ParamVector {
    pub fn garch(alpha: f64, beta: f64, gamma: f64) -> Self {
        ParamVector { alpha, beta, gamma, delta: 0.0 }
    }

    pub fn egarch(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Self {
        ParamVector { alpha, beta, gamma, delta }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha, self.beta, self.gamma, self.delta]
    }

    pub fn from_slice(model: ModelKind, v: &[f64]) -> Self {
        match model {
            ModelKind::Garch11 => ParamVector::garch(v[0], v[1], v[2]),
            ModelKind::Egarch11 => ParamVector::egarch(v[0], v[1], v[2], v[3]),
        }
    }

    /// Checks membership of the admissible region.
    pub fn validate(&self, model: ModelKind) -> Result<()> {
        let ok = match model {
            ModelKind::Garch11 => {
                self.alpha > 0.0 && self.beta >= 0.0 && self.gamma >= 0.0 && self.beta < 1.0
            }
            ModelKind::Egarch11 => {
                (0.0..1.0).contains(&self.beta) && self.delta >= self.gamma.abs()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InadmissibleParams(format!("{self:?} for {model:?}")))
        }
    }

    /// EGARCH state-space floor `alpha / (1 - beta)`.
    pub fn state_floor(&self) -> f64 {
        self.alpha / (1.0 - self.beta)
    }
}

/// Compact per-coordinate box for the search set Theta.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidInput("box bounds length mismatch".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidInput("box has lower > upper".into()));
        }
        Ok(ParamBox { lower, upper })
    }

    /// Shipped default search box.
    ///
    /// EGARCH: alpha in [-5,5], beta in [0,0.999], gamma in [-5,5], delta in
    /// [0,5] with the joint constraint `delta >= |gamma|` enforced by
    /// [`ParamBox::project`]. GARCH: alpha in [1e-6,10], beta in [0,0.999],
    /// gamma in [0,5].
    pub fn default_for(model: ModelKind) -> Self {
        match model {
            ModelKind::Garch11 => ParamBox {
                lower: vec![1e-6, 0.0, 0.0],
                upper: vec![10.0, 0.999, 5.0],
            },
            ModelKind::Egarch11 => ParamBox {
                lower: vec![-5.0, 0.0, -5.0, 0.0],
                upper: vec![5.0, 0.999, 5.0, 5.0],
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Clamps a point into the box, then into the admissible region
    /// (EGARCH raises delta to |gamma| when the joint constraint binds).
    pub fn project(&self, model: ModelKind, v: &[f64]) -> Vec<f64> {
        let mut p: Vec<f64> = v
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| x.clamp(*l, *u))
            .collect();
        if model == ModelKind::Egarch11 && p[3] < p[2].abs() {
            p[3] = p[2].abs().min(self.upper[3]);
            // if |gamma| exceeds the delta range, pull gamma in instead
            if p[3] < p[2].abs() {
                p[2] = p[2].signum() * p[3];
            }
        }
        if model == ModelKind::Garch11 && p[0] <= 0.0 {
            p[0] = self.lower[0].max(f64::MIN_POSITIVE);
        }
        p
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *x >= *l - 1e-12 && *x <= *u + 1e-12)
    }
}

/// One step of the observation-driven SRE map `phi_t(state; theta)`.
///
/// For EGARCH the state must lie in `[alpha/(1-beta), infinity)`; under the
/// parameter invariants the image stays in that half-line.
pub fn sre_step(model: ModelKind, theta: &ParamVector, state: f64, x_prev: f64) -> Result<f64> {
    match model {
        ModelKind::Garch11 => Ok(theta.alpha + theta.beta * state + theta.gamma * x_prev * x_prev),
        ModelKind::Egarch11 => {
            let floor = theta.state_floor();
            if state < floor - 1e-12 {
                return Err(Error::StateBelowFloor { state, floor });
            }
            let w = theta.gamma * x_prev + theta.delta * x_prev.abs();
            Ok(theta.alpha + theta.beta * state + w * (-0.5 * state).exp())
        }
    }
}

/// Per-observation Lipschitz bound of `sre_step` in its state argument.
///
/// GARCH: the state derivative is the constant `beta`. EGARCH, over the
/// restricted state space: `max{beta, (gamma x + delta |x|)
/// exp(-alpha/(2(1-beta)))/2 - beta}`.
pub fn lipschitz_coeff(model: ModelKind, theta: &ParamVector, x_prev: f64) -> f64 {
    match model {
        ModelKind::Garch11 => theta.beta,
        ModelKind::Egarch11 => {
            let w = theta.gamma * x_prev + theta.delta * x_prev.abs();
            let scale = (-0.5 * theta.state_floor()).exp();
            theta.beta.max(0.5 * w * scale - theta.beta)
        }
    }
}

/// Link from filtered state to variance: identity (GARCH) or exp (EGARCH).
pub fn link(model: ModelKind, g: f64) -> f64 {
    match model {
        ModelKind::Garch11 => g,
        ModelKind::Egarch11 => g.exp(),
    }
}

/// Inverse link; the GARCH side needs a positive variance.
pub fn inv_link(model: ModelKind, v: f64) -> Result<f64> {
    match model {
        ModelKind::Garch11 => {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::NonPositiveVariance(v))
            }
        }
        ModelKind::Egarch11 => Ok(v.ln()),
    }
}
