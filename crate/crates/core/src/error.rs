use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("degenerate market: {0}")]
    DegenerateMarket(String),

    #[error("degenerate support: every return equals {0}, the density is a point mass")]
    DegenerateSupport(f64),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("infeasible variance target {target:e}: achievable range on the simplex is [{min:e}, {max:e}]")]
    Infeasible { target: f64, min: f64, max: f64 },

    #[error("csv error at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidInput(_) => "invalid_input",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateMarket(_) => "degenerate_market",
            Error::DegenerateSupport(_) => "degenerate_support",
            Error::Numeric(_) => "numeric",
            Error::UndefinedMeasure(_) => "undefined_measure",
            Error::Infeasible { .. } => "infeasible",
            Error::Csv { .. } => "csv",
            Error::Sampler(_) => "sampler",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
