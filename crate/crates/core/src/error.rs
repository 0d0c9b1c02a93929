use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised anywhere in the inversion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid setup, options or file content supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// The forward system `I - X G_D` could not be solved reliably.
    #[error("singular forward system (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    /// `lambda_CSI` requested for a contrast with no illuminated support.
    #[error("CSI weight undefined: sum_i ||X E0_i||^2 is zero")]
    UndefinedWeight,

    /// A quadratic form produced `p^H H p <= 0` for a nonzero direction.
    #[error("Hessian is not positive definite along the search direction (p^H H p = {curvature:.3e})")]
    NotPositiveDefinite { curvature: f64 },

    /// Iterates or step lengths became non-finite.
    #[error("divergence detected: {0}")]
    Divergence(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// True for failures caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. }
                | Error::UndefinedWeight
                | Error::NotPositiveDefinite { .. }
                | Error::Divergence(_)
        )
    }
}
