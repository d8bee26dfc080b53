use thiserror::Error;

/// Errors produced by parsing, solving and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("arity mismatch for predicate {pred}: declared {declared}, used with {used}")]
    Arity {
        pred: String,
        declared: usize,
        used: usize,
    },

    #[error("rule {rule} has an unsatisfiable constraint")]
    UnsatRuleConstraint { rule: String },

    #[error("operation not supported in the {domain} domain: {what}")]
    DomainMismatch { domain: &'static str, what: String },

    #[error("resource cap exceeded in {what}: {detail}")]
    Resource { what: &'static str, detail: String },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
