use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no sampler for the {0} family")]
    UnsupportedSampler(&'static str),
    #[error("invalid simulation parameter: {0}")]
    Parameter(String),
    #[error("invalid simulation setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Model(#[from] dm_testlab_core::error::Error),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("column {0:?} not found in the header")]
    MissingColumn(String),
    #[error("row {row}, column {column}: missing value")]
    Missing { row: usize, column: String },
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("row {row}, column {column}: {message}")]
    Invalid { row: usize, column: String, message: String },
    #[error("{0} has no data rows")]
    Empty(String),
}

/// Everything `run` can fail with, grouped by exit code.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] dm_testlab_core::error::Error),
    #[error("simulation failure: {0}")]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Ingest(_) | AppError::Output { .. } => 2,
            AppError::Sim(SimError::UnsupportedSampler(_) | SimError::Setup(_) | SimError::Parameter(_)) => 2,
            AppError::Numerical(_) | AppError::Sim(SimError::Model(_)) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Config(_) => "config",
            AppError::Ingest(_) => "data",
            AppError::Numerical(_) => "numerical",
            AppError::Sim(_) => "simulation",
            AppError::Output { .. } => "output",
        }
    }
}
