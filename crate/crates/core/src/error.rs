use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model that violates its own invariants.
    #[error("model error: {0}")]
    Model(String),

    /// Index outside the model or block range.
    #[error("index {index} out of range (length {len})")]
    Index { index: usize, len: usize },

    /// Exhaustive enumeration would exceed the configured budget.
    #[error("enumeration budget exceeded: {needed} outcomes > budget {budget}")]
    Budget { needed: u128, budget: u64 },

    /// Integer index arithmetic outside the supported range.
    #[error("index arithmetic overflow: {0}")]
    Overflow(String),

    /// The requested computation is not available for this kind of model.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
