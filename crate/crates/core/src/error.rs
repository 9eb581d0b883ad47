use thiserror::Error;

/// Errors produced by the simulation, analysis and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("outside validity domain: {0}")]
    Domain(String),

    #[error("degenerate superposition: 1 + <L|B> = {0:e}")]
    DegenerateSuperposition(f64),

    #[error("aliasing risk: {fraction:.3e} of the norm sits in the outermost momentum bins (limit {limit:.1e})")]
    AliasingRisk { fraction: f64, limit: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn grid(msg: impl Into<String>) -> Self {
        Error::InvalidGrid(msg.into())
    }

    /// True for failures that come from the numerics rather than from the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::AliasingRisk { .. }
                | Error::DegenerateFit(_)
                | Error::DegenerateSuperposition(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
