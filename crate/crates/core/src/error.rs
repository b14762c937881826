use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error at row {row}: {message}")]
    RowValidation { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular design: column {column} ({name}) is linearly dependent on earlier columns")]
    SingularDesign { column: usize, name: String },

    #[error("degenerate outcome: {0}")]
    DegenerateOutcome(String),

    #[error("separation detected: {0}")]
    Separation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("positivity violation at row {row}: {quantity} = {value:e}")]
    Positivity {
        row: usize,
        quantity: &'static str,
        value: f64,
    },

    #[error("missing nuisance model: {0}")]
    MissingModel(String),

    #[error("estimator mismatch: {0}")]
    EstimatorMismatch(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("root finding failed: {0}")]
    Solver(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line tool.
    ///
    /// 1 covers input and configuration problems, 2 model fitting and
    /// positivity failures, 3 inference and simulation-level failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_)
            | Error::RowValidation { .. }
            | Error::Validation(_)
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Config(_)
            | Error::NotApplicable(_)
            | Error::Serialization(_) => 1,
            Error::SingularDesign { .. }
            | Error::DegenerateOutcome(_)
            | Error::Separation(_)
            | Error::DimensionMismatch { .. }
            | Error::Positivity { .. }
            | Error::MissingModel(_)
            | Error::EstimatorMismatch(_)
            | Error::Solver(_) => 2,
            Error::Inference(_) | Error::Simulation(_) => 3,
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::RowValidation { .. } | Error::Validation(_) => "validation",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Config(_) => "config",
            Error::SingularDesign { .. } => "singular_design",
            Error::DegenerateOutcome(_) => "degenerate_outcome",
            Error::Separation(_) => "separation",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Positivity { .. } => "positivity",
            Error::MissingModel(_) => "missing_model",
            Error::EstimatorMismatch(_) => "estimator_mismatch",
            Error::NotApplicable(_) => "not_applicable",
            Error::Solver(_) => "solver",
            Error::Inference(_) => "inference",
            Error::Simulation(_) => "simulation",
            Error::Serialization(_) => "serialization",
        }
    }
}
