use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum CsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("entries are not completely symmetric (max violation {max_violation:.3e} exceeds tolerance {tolerance:.3e})")]
    NotCompletelySymmetric { max_violation: f64, tolerance: f64 },

    #[error("atom vector {index} has zero norm")]
    ZeroVectorAtom { index: usize },

    #[error("unknown example id {0} (expected 1..=4)")]
    UnknownExampleId(u32),

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("unsupported format version {0:?} (expected \"csmat-v1\")")]
    UnsupportedVersion(String),

    #[error("representation pair needs a dense reconstruction but n = {0} exceeds the dense cap")]
    RepresentationPairUnsupported(usize),

    #[error("KKT system is singular or too ill-conditioned")]
    SingularKktSystem,

    #[error("line-search directions are near-parallel")]
    NearParallelInputs,

    #[error("degenerate Frank-Wolfe direction: |sigma - rho_k|_F below threshold")]
    DegenerateDirection,

    #[error("Gram matrix is too ill-conditioned for the active-set solve")]
    GramIllConditioned,

    #[error("grid search only supports n = 2 or 3, got n = {0}")]
    UnsupportedDimension(usize),

    #[error("dense reconstruction for n = {0} exceeds the cap")]
    DenseCapExceeded(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CsError>;
