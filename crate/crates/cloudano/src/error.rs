//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;
use crate::model::{AnomalyType, PatternType};

/// Unified error for every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A document or value failed structural validation.
    #[error("schema error in {field}: {message}")]
    Schema { field: String, message: String },

    /// A value parsed fine but violates a semantic invariant.
    #[error("invariant violation in {field}: {message}")]
    Invariant { field: String, message: String },

    /// A metric series is too short for the requested computation.
    #[error("series too short: need at least {min} samples, got {len}")]
    ShortSeries { min: usize, len: usize },

    /// Vocabulary construction was given no log lines at all.
    #[error("empty corpus: the vocabulary needs at least one log line")]
    EmptyCorpus,

    /// A ruleset lookup for a type with no rule entry.
    #[error("ruleset has no rule for anomaly type {0}")]
    UnknownAnomalyType(AnomalyType),

    /// A ruleset entry carries a regex that does not compile.
    #[error("invalid regex {pattern:?} in rule for {rule}: {message}")]
    InvalidRegex {
        rule: String,
        pattern: String,
        message: String,
    },

    /// The generator cannot realize the requested pattern inside the range.
    #[error("infeasible range [{low}, {high}] for pattern {pattern}: {message}")]
    InfeasibleRange {
        pattern: PatternType,
        low: f64,
        high: f64,
        message: String,
    },

    /// A generated case failed its own closure self-check against the ruleset.
    #[error("template {template} failed the closure self-check: {message}")]
    TemplateClosure { template: String, message: String },

    /// A dataset directory disagrees with its manifest.
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    /// A configuration value is out of its documented domain.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The model backend failed after its own retry policy ran out.
    #[error(transparent)]
    Backend(#[from] BackendError),

    /// Filesystem IO failed.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A JSON document could not be read or written.
    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Shorthand for a schema error.
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Shorthand for an invariant violation.
    pub fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Wraps an IO error with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps a JSON error with a human-readable location.
    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
