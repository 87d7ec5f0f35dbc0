use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: lo ({lo}) must be < hi ({hi})")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("incompatible models: {0}")]
    IncompatibleModels(String),

    #[error("cache does not match model: {0}")]
    StaleCache(String),

    #[error("layer {layer}: n_fix = {n_fix} exceeds fan-in {fan_in}")]
    Construction {
        layer: usize,
        n_fix: usize,
        fan_in: usize,
    },

    #[error("non-finite value at epoch {epoch}, batch {batch}: {what}")]
    NumericFailure {
        epoch: usize,
        batch: usize,
        what: String,
    },

    #[error("stratification failed: class {class} has only {count} samples (need >= 3)")]
    Stratification { class: usize, count: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("missing data file {0}")]
    MissingFile(PathBuf),

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Wrap an error with experiment coordinates, keeping the root cause.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Run {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping any run-context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Run { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Json(_) | Error::UnknownDataset(_) => 2,
            Error::Data(_)
            | Error::MissingFile(_)
            | Error::Csv(_)
            | Error::Stratification { .. }
            | Error::LabelOutOfRange { .. } => 3,
            Error::NumericFailure { .. } => 4,
            _ => 1,
        }
    }
}
