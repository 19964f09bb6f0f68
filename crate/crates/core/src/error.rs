use thiserror::Error;

/// Errors raised by the solvers and the experiment driver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator kind error: {0}")]
    Kind(String),

    #[error("blow-up of exact {kind} flow at node {node} (x = {x}) for t = {time}")]
    BlowUp {
        kind: &'static str,
        node: usize,
        x: f64,
        time: f64,
    },

    #[error("non-finite value in stage {stage} of {method}")]
    Overflow { method: String, stage: usize },

    #[error("insufficient data for order fit: {usable} usable points, need {required}")]
    InsufficientData { usable: usize, required: usize },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for numerical failures (blow-up, overflow) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::Overflow { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
