use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter vector violates the admissible region of its model.
    #[error("inadmissible parameters: {0}")]
    InadmissibleParams(String),
    /// EGARCH state argument below the restricted state space floor.
    #[error("state {state} below the state-space floor {floor}")]
    StateBelowFloor { state: f64, floor: f64 },
    /// Identity-link inverse requires a positive variance.
    #[error("non-positive variance {0} has no GARCH state")]
    NonPositiveVariance(f64),
    /// Simulated GARCH configuration fails the Lyapunov stationarity check.
    #[error("stationarity violated: estimated E log(beta + gamma Z^2) = {estimate} >= 0 (se {std_error})")]
    NonStationary { estimate: f64, std_error: f64 },
    /// Constrained optimization found no feasible start.
    #[error("no feasible point found: every start ended with empirical Lyapunov >= 0")]
    NoFeasiblePoint,
    /// Moment configuration too close to a pole of the closed forms.
    #[error("near-singular moments: {0}")]
    NearSingularMoments(String),
    /// E Z^4 undefined (Student-t with nu <= 4).
    #[error("fourth moment undefined for Student-t with nu = {0}")]
    FourthMomentUndefined(f64),
    /// B estimate not positive definite.
    #[error("B not positive definite: LI violated or MC noise")]
    NotPositiveDefinite,
    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: error estimate {0:e}")]
    QuadratureNoConvergence(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
