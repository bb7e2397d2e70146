//! Standardized innovation distributions.
//!
//! Innovations are normalized so that `E Z = 0` and `E Z^2 = 1`. The
//! Student-t option rescales a t(nu) draw by `sqrt((nu-2)/nu)`; `nu > 2` is
//! enough for simulation while the asymptotic-variance machinery additionally
//! needs `E Z^4 < infinity`, i.e. `nu > 4`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad;

/// Default tolerance for density-weighted quadrature.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationDist {
    StdNormal,
    /// Student-t with `nu` degrees of freedom, scaled to unit variance.
    StdStudentT { nu: f64 },
}

impl InnovationDist {
    pub fn std_student_t(nu: f64) -> Result<Self> {
        if nu <= 2.0 {
            return Err(Error::InvalidInput(format!(
                "Student-t needs nu > 2 for unit variance, got {nu}"
            )));
        }
        Ok(InnovationDist::StdStudentT { nu })
    }

    /// Density of the standardized innovation.
    pub fn pdf(&self, z: f64) -> f64 {
        match self {
            InnovationDist::StdNormal => {
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            InnovationDist::StdStudentT { nu } => {
                let s = (nu / (nu - 2.0)).sqrt();
                let t = s * z;
                let ln_c = ln_gamma(0.5 * (nu + 1.0))
                    - ln_gamma(0.5 * nu)
                    - 0.5 * (nu * std::f64::consts::PI).ln();
                s * (ln_c - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p()).exp()
            }
        }
    }

    /// One standardized draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationDist::StdNormal => StandardNormal.sample(rng),
            InnovationDist::StdStudentT { nu } => {
                let t: f64 = StudentT::new(*nu).expect("nu > 2 checked").sample(rng);
                t * ((nu - 2.0) / nu).sqrt()
            }
        }
    }

    /// `E f(Z)` by adaptive quadrature against the density, tolerance `tol`.
    pub fn expect_tol<F: Fn(f64) -> f64>(&self, f: F, tol: f64) -> Result<f64> {
        quad::integrate_real_line(|z| f(z) * self.pdf(z), tol)
    }

    /// `E f(Z)` at the default 1e-10 tolerance.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        self.expect_tol(f, QUAD_TOL)
    }

    /// `E |Z|`.
    pub fn e_absz(&self) -> Result<f64> {
        self.expect(|z| z.abs())
    }

    /// `E Z^4`; undefined for Student-t with `nu <= 4`.
    pub fn e_z4(&self) -> Result<f64> {
        match self {
            InnovationDist::StdNormal => Ok(3.0),
            InnovationDist::StdStudentT { nu } => {
                if *nu <= 4.0 {
                    return Err(Error::FourthMomentUndefined(*nu));
                }
                // standardized t kurtosis
                Ok(3.0 * (nu - 2.0) / (nu - 4.0))
            }
        }
    }

    /// Verifies `E Z^2 = 1` within the quadrature tolerance.
    pub fn check_unit_variance(&self) -> Result<()> {
        let v = self.expect(|z| z * z)?;
        if (v - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "innovation distribution has E Z^2 = {v}, expected 1"
            )));
        }
        Ok(())
    }
}
