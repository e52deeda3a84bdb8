use thiserror::Error;

/// Errors produced by the model, simulator, estimator and pricing loop.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter {theta:?} lies outside the parameter space")]
    OutsideParamSpace { theta: Vec<f64> },

    #[error("parameter has dimension {got}, family expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("absorbing empty state: no customer ever joins an empty queue")]
    AbsorbingEmptyState,

    #[error("no informative transitions")]
    NoInformativeTransitions,

    #[error("information singular")]
    InformationSingular,

    #[error("truncation failed after {0} states")]
    TruncationFailed(usize),

    #[error("boundary retries exhausted after {0} extra observations")]
    BoundaryRetriesExhausted(usize),

    #[error("observation source exhausted")]
    SourceExhausted,

    #[error("malformed path: {0}")]
    MalformedPath(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
