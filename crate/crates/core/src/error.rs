use alloc::string::String;
use alloc::vec::Vec;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),

    #[error("missing modality: no {0} samples in window")]
    MissingModality(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid count: {0}")]
    InvalidCount(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("fraction undefined: {0}")]
    UndefinedFraction(String),

    #[error("probe out of order: got index {got} after {last}")]
    Sequencing { last: u64, got: u64 },

    #[error("validation failed for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflicting intervals: {}", format_conflicts(.0))]
    Conflict(Vec<(u64, u64)>),

    #[error("metric `{0}` is undefined: both classes are required")]
    UndefinedMetric(&'static str),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("malformed data: {0}")]
    Format(String),
}

fn format_conflicts(pairs: &[(u64, u64)]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, (s, e)) in pairs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "[{s}, {e})");
    }
    out
}

impl Error {
    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
