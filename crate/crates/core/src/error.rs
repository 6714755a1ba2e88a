use thiserror::Error;

/// Errors raised anywhere in the simulation and diagnostics pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScnsError {
    #[error("invalid dimension {0}: only 2 and 3 are supported")]
    InvalidDimension(usize),

    #[error("invalid resolution on axis {axis}: {cells} cells (minimum 4)")]
    InvalidResolution { axis: usize, cells: usize },

    #[error("invalid extent on axis {axis}: {extent}")]
    InvalidExtent { axis: usize, extent: f64 },

    #[error("incompatible boundary conditions: {0}")]
    IncompatibleBoundaryConditions(String),

    #[error("boundary mismatch: {0}")]
    BoundaryMismatch(String),

    #[error("field length {found} does not match grid size {expected}")]
    FieldSizeMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid exponent p = {0}: require p >= 1")]
    InvalidExponent(f64),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("solver failed to converge after {iterations} iterations (residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("mollifier radius {eps} is narrower than the grid spacing {spacing}")]
    KernelTooNarrow { eps: f64, spacing: f64 },

    #[error("negative density {0} passed to the regularized growth map")]
    NegativeDensity(f64),

    #[error("singular kinetics: theta({s}) = {theta} <= 0")]
    SingularKinetics { s: f64, theta: f64 },

    #[error("invalid kinetics: {0}")]
    InvalidKinetics(String),

    #[error("expected {expected} Wiener increments, got {found}")]
    ModeCountMismatch { expected: usize, found: usize },

    #[error("jump mark {z} lies outside the {region} region")]
    MarkOutOfRegion { z: f64, region: &'static str },

    #[error("CFL violation: Courant number {courant:.4} exceeds safety factor {safety}")]
    CflViolation { courant: f64, safety: f64 },

    #[error("step {0} has no recorded noise draw")]
    MissingNoiseRecord(usize),

    #[error("window of {0} snapshots is too short (need at least 2)")]
    WindowTooShort(usize),

    #[error("diagnostics stream has no martingale increments")]
    MissingIncrements,

    #[error("boundary ratio is undefined on a periodic domain")]
    PeriodicDomain,

    #[error("need at least {needed} paths, got {found}")]
    InsufficientPaths { needed: usize, found: usize },

    #[error("path {index} failed: {cause}")]
    PathFailure { index: usize, cause: String },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },

    #[error("{tag}: {detail}")]
    AssumptionViolation { tag: String, detail: String },

    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl ScnsError {
    pub(crate) fn assumption(tag: &str, detail: impl Into<String>) -> Self {
        ScnsError::AssumptionViolation {
            tag: tag.to_string(),
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for ScnsError {
    fn from(err: std::io::Error) -> Self {
        ScnsError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, ScnsError>;
