use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the engine reports. The harness maps each variant to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("hermiticity violation: max deviation {deviation:e} exceeds {tolerance:e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("no gapped multiplet: {0}")]
    NoGappedMultiplet(String),

    #[error("tolerance failure in {check}: value {value:e} exceeds {tolerance:e}")]
    Tolerance {
        check: String,
        value: f64,
        tolerance: f64,
    },

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code taxonomy: 0 ok, 2 config, 3 no multiplet, 4 tolerance, 5 resource.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::Config(_) | Error::NotHermitian { .. } => 2,
            Error::NoGappedMultiplet(_) => 3,
            Error::Tolerance { .. } | Error::NonConvergence { .. } => 4,
            Error::Resource(_) | Error::Io(_) | Error::Json(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::NoGappedMultiplet(_) => "no_gapped_multiplet",
            Error::Tolerance { .. } => "tolerance",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Resource(_) => "resource",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
