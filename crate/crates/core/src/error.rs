use thiserror::Error;

/// Errors raised by the diagram, measure, spectral and cohomology layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square and non-empty (got {rows} rows, row {bad_row} has {bad_len} entries)")]
    NotSquare {
        rows: usize,
        bad_row: usize,
        bad_len: usize,
    },
    #[error("vertex {vertex} has an all-zero {kind}")]
    ZeroLine { vertex: usize, kind: &'static str },
    #[error("matrix is not primitive: no positive power up to the Wielandt bound {bound}")]
    NotPrimitive { bound: usize },
    #[error("every cylinder continues uniquely; the path space is a single point per vertex")]
    DegenerateCylinder,
    #[error("{what} did not converge (residual {residual:e})")]
    ConvergenceFailure { what: &'static str, residual: f64 },
    #[error("level {level} would hold {paths} paths, above the cap of {cap}")]
    CapacityExceeded { level: usize, paths: u128, cap: usize },
    #[error("paths have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("gamma = {gamma} must exceed the relative dimension {d_psi}")]
    GammaTooSmall { gamma: f64, d_psi: f64 },
    #[error("gamma = {gamma} must exceed the harmonic threshold {threshold}")]
    ThresholdViolation { gamma: f64, threshold: f64 },
    #[error("Gram-Schmidt broke down below cylinder {path}: weights underflow")]
    GramSchmidtBreakdown { path: String },
    #[error("function level {function_level} exceeds what the table covers ({table_level})")]
    LevelExceedsTable {
        function_level: usize,
        table_level: usize,
    },
    #[error("Lambda = {lambda} is beyond the completeness threshold {threshold} of the table")]
    TableIncomplete { lambda: f64, threshold: f64 },
    #[error("only {levels} spectral levels fall in the fit range; at least 5 are needed")]
    InsufficientRange { levels: usize },
    #[error("heat-kernel tail bound {bound:e} exceeds tolerance {tolerance:e}")]
    TruncationError { bound: f64, tolerance: f64 },
    #[error("{0} is undefined for a constant function")]
    DivisionByZero(&'static str),
    #[error("operation needs d(A) > 1")]
    NotApplicable,
    #[error("vector is not in the eventual range of A^T (distance {distance:e})")]
    NotInEventualRange { distance: f64 },
    #[error("trace constraints have rank {rank}, expected {expected}")]
    RankDeficiency { rank: usize, expected: usize },
    #[error("constraint Gram matrix is numerically singular (condition number {condition:e})")]
    SingularGram { condition: f64 },
    #[error("exact mode unsupported: {0}")]
    ExactUnsupported(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
