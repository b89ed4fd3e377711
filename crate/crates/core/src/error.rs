use std::path::PathBuf;

/// Errors raised anywhere in the repair pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown predicate variable `{0}`")]
    UnknownVariable(String),

    #[error("trajectory too short: formula needs {needed} steps after t={start}, trajectory has {available}")]
    HorizonTooShort {
        start: usize,
        needed: usize,
        available: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },

    #[error("non-finite parameter in {0}")]
    NonFinite(String),

    #[error("seed controller synthesis failed: {0}")]
    Synthesis(String),

    #[error("interval bounds diverged past {cap} at step {step}")]
    Divergence { step: usize, cap: f64 },

    #[error("formula is outside the verifiable templates: {0}")]
    UnsupportedFormula(String),

    #[error("region {region} passed verification but has a failing sample (rho = {rho}); verifier is unsound")]
    VerifierInconsistency { region: usize, rho: f64 },

    #[error("unknown plant `{0}`")]
    UnknownPlant(String),

    #[error("schema mismatch in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::UnknownVariable(_) => "unknown_variable",
            Error::HorizonTooShort { .. } => "horizon_too_short",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidValue { .. } => "invalid_value",
            Error::NonFinite(_) => "non_finite",
            Error::Synthesis(_) => "synthesis",
            Error::Divergence { .. } => "divergence",
            Error::UnsupportedFormula(_) => "unsupported_formula",
            Error::VerifierInconsistency { .. } => "verifier_inconsistency",
            Error::UnknownPlant(_) => "unknown_plant",
            Error::Schema { .. } => "schema",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
