use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("range error: {value} is outside the image [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid function spec: {0}")]
    InvalidFunction(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("quadrature did not converge on [{lo}, {hi}] (partial estimate {partial}, error estimate {error_estimate})")]
    Quadrature {
        lo: f64,
        hi: f64,
        partial: f64,
        error_estimate: f64,
    },

    #[error("perturbation error: {0}")]
    Perturbation(String),

    #[error("region error: {0}")]
    Region(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// 2 for configuration and validation problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. }
            | Error::Capacity(_)
            | Error::InvalidPolicy(_)
            | Error::InvalidFunction(_)
            | Error::Perturbation(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::Csv(_) => 2,
            Error::Range { .. }
            | Error::Model(_)
            | Error::Quadrature { .. }
            | Error::Region(_)
            | Error::Assumption(_) => 3,
        }
    }
}
