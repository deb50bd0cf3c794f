use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown Levy density family `{0}`")]
    UnknownFamily(String),

    #[error("parameter `{name}` = {value} is out of range ({reason})")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: &'static str,
    },

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("table density is not monotone near t = {t}")]
    NonMonotoneTable { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    QuadNonConvergence { estimate: f64, tolerance: f64 },

    #[error("integrand tail is not integrable (heavy-tailed density)")]
    NonIntegrable,

    #[error("moment integral of order {order} diverges")]
    DivergentMoment { order: usize },

    #[error("no bracket for v at x = {x}: F stays {side} 1 down to y = {y:e}")]
    BracketNotFound { x: f64, y: f64, side: &'static str },

    #[error("v solver stalled at x = {x} with residual {residual:e}")]
    SolverStalled { x: f64, residual: f64 },

    #[error("boundary point x = {x} is inconsistent: Im H = {imag:e}")]
    InconsistentCurve { x: f64, imag: f64 },

    #[error("Cauchy transform inversion did not converge at zeta = {re} + {im}i (residual {residual:e})")]
    OracleNonConvergence { re: f64, im: f64, residual: f64 },

    #[error("boundary map is not strictly increasing between x = {x0} and x = {x1}")]
    NonMonotoneBoundary { x0: f64, x1: f64 },

    #[error("density mass {mass} deviates from 1 by more than {tolerance} (domain truncated?)")]
    MassDeficit { mass: f64, tolerance: f64 },
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadNonConvergence { .. }
                | Error::NonIntegrable
                | Error::DivergentMoment { .. }
                | Error::BracketNotFound { .. }
                | Error::SolverStalled { .. }
                | Error::InconsistentCurve { .. }
                | Error::OracleNonConvergence { .. }
                | Error::NonMonotoneBoundary { .. }
                | Error::MassDeficit { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
