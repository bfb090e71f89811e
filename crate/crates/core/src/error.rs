use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("fields are defined on different grids")]
    DomainMismatch,

    #[error("iteration limit reached after {iterations} iterations (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("source term is negative at node {node} (value {value:e})")]
    InvalidSource { node: usize, value: f64 },

    #[error("source term vanishes identically")]
    DegenerateSource,

    #[error("energy identity violated: |{lhs:e} - {rhs:e}| exceeds {tol:e}")]
    IdentityViolation { lhs: f64, rhs: f64, tol: f64 },

    #[error("degenerate reduction: alpha = {0:e} must be positive")]
    DegenerateReduction(f64),

    #[error("field is identically zero")]
    ZeroField,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("branch {branch} failed verification: residual {residual:e} exceeds {tol:e}")]
    VerificationFailure {
        branch: String,
        residual: f64,
        tol: f64,
    },

    #[error("nonlocal coefficient a - b|u|^2 vanishes for branch {0}")]
    DegenerateCoefficient(usize),

    #[error("descent left the ball |u|^2 < {limit:e} (reached {norm_sq:e})")]
    BallEscape { norm_sq: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}
