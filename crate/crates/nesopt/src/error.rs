//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or state outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Adaptive step size underflowed; the system is too stiff for the
    /// configured tolerances. Carries the last time reached.
    #[error("step size underflow at tau = {t}")]
    Stiffness { t: f64 },
    /// State matrix is not Hurwitz; the Lyapunov equation has no
    /// positive-semidefinite solution.
    #[error("stability error: {0}")]
    Stability(String),
    /// Analytic expression hit a (near-)singular denominator.
    #[error("singularity: {0}")]
    Singularity(String),
    /// Energy trace requested for a trajectory with zero starting energy.
    #[error("zero starting energy")]
    ZeroStartEnergy,
    /// Grids of two results do not share axes.
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    /// A numerical routine failed to reach its accuracy contract.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
