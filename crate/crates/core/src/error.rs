use thiserror::Error;

/// Errors raised by the numerical kernels and the curve pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a documented type invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("requested precision not achievable: {0}")]
    Precision(String),
    #[error("point is not on the theta divisor (residual {residual:.3e})")]
    NotOnDivisor { residual: f64 },
    #[error("point is a singular point of the theta divisor (gradient norm {grad_norm:.3e})")]
    SingularPoint { grad_norm: f64 },
    #[error("unsupported genus {0}")]
    UnsupportedGenus(usize),
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("integer overflow in symplectic arithmetic")]
    Overflow,
    #[error("excluded point: {0}")]
    Excluded(String),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("inconsistent estimates: {0}")]
    Inconsistent(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for failures caused by numerics rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence(_)
                | Error::Divergent(_)
                | Error::Inconsistent(_)
                | Error::IllConditioned(_)
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
