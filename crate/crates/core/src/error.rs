use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unsupported mode: {0}")]
    Unsupported(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("incomplete system: missing remainder for word {0}")]
    IncompleteSystem(String),
    #[error("missing reference term {0}")]
    MissingTerm(String),
    #[error("evaluation order: {0}")]
    Ordering(String),
    #[error("non-contraction: ratio {ratio:.4} >= 1 for {streak} consecutive iterations; try a smaller horizon T")]
    NonContraction { ratio: f64, streak: usize },
    #[error("reference solver unreliable: step-halving disagreement {disagreement:.3e} exceeds {limit:.3e}")]
    OracleUnreliable { disagreement: f64, limit: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Validation failures map to exit code 2, numerical ones to 3, io to 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Format(_) => 4,
            Error::NonContraction { .. } | Error::OracleUnreliable { .. } | Error::Degenerate(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
