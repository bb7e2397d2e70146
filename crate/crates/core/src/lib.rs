//! Stochastic-recurrence volatility filtering, constrained QLIK estimation,
//! invertibility diagnostics, and asymptotic variances for GARCH(1,1) and
//! EGARCH(1,1).
//!
//! The filtered log-volatility (EGARCH) or volatility (GARCH) is the state of
//! a stochastic recurrence equation driven by the observations; estimation
//! minimizes the Gaussian quasi-likelihood criterion over a box, subject to
//! the empirical invertibility constraint `mean log Lambda(theta, X_t) < 0`.

pub mod asymptotics;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod filter;
pub mod invertibility;
pub mod models;
pub mod quad;
pub mod rng;
pub mod simulate;

pub use asymptotics::{
    asymptotic_variance, b11_partial_sums, b_diag_closed_form, b_matrix_mc, check_mm_prime,
    garch_sandwich_mc, AsymptoticReport, BMatrixMc, GarchSandwichMc, InnovationMoments,
};
pub use dist::InnovationDist;
pub use error::{Error, Result};
pub use estimate::{fit, fit_x, profile, write_profile_csv, FitOptions, FitResult, ProfilePoint};
pub use filter::{
    default_g_init, forecast, qlik, qlik_x, run_filter, run_filter_x, FilterTrajectory, Forecast,
    QlikValue, DEFAULT_BURN, EGARCH_DIVERGENCE, GARCH_DIVERGENCE,
};
pub use invertibility::{
    empirical_lyapunov, empirical_lyapunov_for, model_implied_lyapunov, region_scan,
    write_region_csv, LyapunovKind, LyapunovReport, RegionPoint,
};
pub use models::{
    inv_link, link, lipschitz_coeff, sre_step, ModelKind, ParamBox, ParamVector,
};
pub use quad::{integrate, integrate_real_line};
pub use rng::{split_stream, stream, Stream};
pub use simulate::{simulate, stationarity_lyapunov, Path, DEFAULT_BURN_IN};
