use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants follow the failure classes the checks distinguish: bad
/// arguments, requests beyond what a routine supports, broken geometric
/// preconditions, and internal cross-checks that disagree.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Request the routine cannot honour (dimension, jet degree, backend).
    #[error("capability error: {0}")]
    Capability(String),
    /// Geometric input is invalid (e.g. a metric that is not positive definite).
    #[error("geometry error: {0}")]
    Geometry(String),
    /// A formula was asked to run outside its hypotheses.
    #[error("precondition error: {0}")]
    Precondition(String),
    /// Two routes that must agree did not.
    #[error("internal consistency error: {0}")]
    InternalConsistency(String),
    /// Finite-difference estimates failed their own stability test.
    #[error("step-size error: {0}")]
    StepSize(String),
    /// A configuration that makes the functional undefined.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    /// A least-squares fit whose residual is too large to trust.
    #[error("grid error: {0}")]
    Grid(String),
    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
