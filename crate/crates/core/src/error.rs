use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sample {row} column {col} value {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        row: usize,
        col: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("matrix is numerically singular: {0}")]
    Singular(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("model document: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (singular systems, failed
    /// factorizations) as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular(_) | Error::Degenerate(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_stage(self, stage: usize) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
