use thiserror::Error;

pub type Result<T, E = KansaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KansaError {
    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("unsupported Bessel order {0}")]
    UnsupportedOrder(f64),

    #[error("Matérn profile of order 0 is singular at r = 0")]
    SingularProfile,

    #[error("invalid kernel parameters: {0}")]
    KernelParameter(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("degenerate point set: {0}")]
    DegenerateSet(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl KansaError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        KansaError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
