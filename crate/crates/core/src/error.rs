use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed or inconsistent arguments.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A regime precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The operation only supports the piecewise-linear rate.
    #[error("unsupported rate function: {0}")]
    UnsupportedRate(String),
    /// The fixed-point equation for the equilibrium rate has no root in the
    /// scanned bracket.
    #[error("no non-zero equilibrium found on [{lo}, {hi}] (min residual {min_residual:.3e}, max residual {max_residual:.3e})")]
    NoEquilibrium {
        lo: f64,
        hi: f64,
        min_residual: f64,
        max_residual: f64,
        profile: Vec<(f64, f64)>,
    },
    /// An iterative scheme did not converge.
    #[error("no convergence after {iterations} iterations (last change {last_change:.3e})")]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        history: Vec<f64>,
    },
    /// No sampled time had a survival probability inside the target bracket.
    #[error("calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
