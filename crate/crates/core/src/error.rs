use thiserror::Error;

/// Errors from the dense kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DenseError {
    #[error("matrix is not positive definite: non-positive pivot at index {pivot}")]
    NotSpd { pivot: usize },
    #[error("triangular matrix is singular: zero diagonal at index {index}")]
    SingularTriangular { index: usize },
    #[error("input contains non-finite entries")]
    NonFinite,
    #[error("accuracy parameter {0} is outside [0, 1]")]
    InvalidTolerance(f64),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// Errors from sparse matrix construction and Matrix Market I/O.
#[derive(Debug, Error)]
pub enum SparseError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported Matrix Market kind `{0}`: only `matrix coordinate real symmetric` is accepted")]
    NotSymmetricReal(String),
    #[error("asymmetric values at ({row}, {col})")]
    AsymmetricValues { row: usize, col: usize },
    #[error("non-positive diagonal entry at index {index}")]
    NonpositiveDiagonal { index: usize },
    #[error("invalid matrix structure: {0}")]
    InvalidStructure(String),
}

/// Errors from the factorization driver and the factor container.
#[derive(Debug, Error)]
pub enum FactorError {
    #[error("numerical breakdown in cluster {cluster}: {source}")]
    NotSpd {
        cluster: usize,
        #[source]
        source: DenseError,
    },
    #[error("dense kernel failure: {0}")]
    Dense(#[from] DenseError),
    #[error("vector length {found} does not match factor dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("hierarchy does not match matrix: {0}")]
    HierarchyMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("factor file error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Errors from the Krylov solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KrylovError {
    #[error("CG breakdown at iteration {iteration}: pᵀAp = {curvature:e} is not positive")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("vector length {found} does not match operator dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Top-level error for the convenience entry points that chain several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
}
