use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh validation failed: {0}")]
    MeshValidation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("assembly failed for element pair ({test}, {trial}): {reason}")]
    Assembly {
        test: usize,
        trial: usize,
        reason: String,
    },

    #[error("missing operator block {kind} on interfaces ({row}, {col})")]
    MissingOperator {
        kind: String,
        row: usize,
        col: usize,
    },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("infeasible combination: {0}")]
    Feasibility(String),

    #[error("resonance: singular coefficient system at order {0}")]
    Resonance(usize),

    #[error("special function out of range: {0}")]
    Range(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short category label used in benchmark reports.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::MeshValidation(_) => "mesh",
            Error::Capacity(_) => "capacity",
            Error::Assembly { .. } => "assembly",
            Error::MissingOperator { .. } => "dependency",
            Error::Singular(_) => "singular",
            Error::Feasibility(_) => "feasibility",
            Error::Resonance(_) => "resonance",
            Error::Range(_) => "range",
            Error::Internal(_) => "internal",
            Error::Config(_) => "config",
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
        }
    }
}
