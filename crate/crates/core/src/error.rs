use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point lies on the jump set (within {tol:e} of a jump geometry)")]
    OnJumpSet { tol: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),
    #[error("invalid catalog parameters for `{entry}`: {reason}")]
    CatalogParams { entry: String, reason: String },
    #[error("unsupported dimension {0} (supported: 1..={1})")]
    UnsupportedDimension(usize, usize),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("layer not resolved: spacing {spacing:e} exceeds epsilon/8 = {limit:e}")]
    LayerUnresolved { spacing: f64, limit: f64 },
    #[error("exponent q = {0} must satisfy q > 1")]
    QClampError(f64),
    #[error("another jump lies within distance {0} of the profile jump")]
    MultipleJumpsInWindow(f64),
    #[error("epsilon = {eps} too large: {reason}")]
    EpsilonTooLarge { eps: f64, reason: String },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("correction bump has discrete mass {0}, expected 1")]
    PhiMassNotOne(f64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
