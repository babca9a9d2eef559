use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model mismatch: expected {expected}, found {found}")]
    ModelMismatch { expected: String, found: String },

    #[error("unknown model id `{id}`; valid ids: torus:<d> (1..=6), heisenberg-nilmanifold, heisenberg, su2")]
    UnknownModel { id: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("time {t} outside supported range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("{operation} failed to converge: {diagnostics}")]
    Convergence {
        operation: &'static str,
        diagnostics: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    /// True for errors caused by bad caller input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ModelMismatch { .. }
                | Error::UnknownModel { .. }
                | Error::InvalidParameter { .. }
                | Error::Unsupported(_)
                | Error::OutOfRange { .. }
                | Error::Format(_)
        )
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be a positive finite number, got {value}"),
        ))
    }
}
