use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration or parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested construction or check does not apply to this input.
    #[error("not applicable: {0}")]
    NotApplicable(String),
    /// A documented precondition of the operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// An auxiliary bound failed to stabilize over the run.
    #[error("unstable bound: {0}")]
    Unstable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
