//! Error types shared across the analysis stages.

use thiserror::Error;

/// A single schema violation found while validating a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    /// Where the violation was found, e.g. `method com.app.A.run() stmt 3`.
    pub context: String,
    pub message: String,
}

impl std::fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Input document is not even well-formed JSON.
    #[error("malformed document: {0}")]
    Malformed(String),

    /// Document parsed but failed schema validation; all violations are listed.
    #[error("schema validation failed:\n{}", format_violations(.0))]
    Schema(Vec<SchemaViolation>),

    /// An operation was called outside its domain (bad id, unknown name, bad location).
    #[error("{0}")]
    Domain(String),
}

fn format_violations(violations: &[SchemaViolation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
