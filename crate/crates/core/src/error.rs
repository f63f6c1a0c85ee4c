use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numeric overflow in row {row}: {detail}")]
    NumericOverflow { row: usize, detail: String },

    #[error("degenerate attention denominator in row {row}: {value}")]
    DegenerateDenominator { row: usize, value: f64 },

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_parameter(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for the failures the CLI maps to its numeric exit code.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericOverflow { .. } | Error::DegenerateDenominator { .. }
        )
    }

    /// True for caller mistakes (bad shapes, out-of-domain parameters).
    pub fn is_invalid_input(&self) -> bool {
        matches!(self, Error::InvalidArgument(_) | Error::InvalidParameter(_))
    }
}
