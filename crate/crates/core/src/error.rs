use thiserror::Error;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CdError {
    #[error("operator backends differ: {left} vs {right}")]
    BackendMismatch { left: &'static str, right: &'static str },

    #[error("site counts differ: {left} vs {right}")]
    SiteCountMismatch { left: usize, right: usize },

    #[error("operation `{op}` is not available for the {backend} backend")]
    Unsupported { op: &'static str, backend: &'static str },

    #[error("dense conversion needs dimension {dim}, above the cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("Pauli strings support at most 128 sites, got {0}")]
    TooManySites(usize),

    #[error("operator is not {expected}: deviation {deviation:e}")]
    Hermiticity { expected: &'static str, deviation: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("basis is not orthonormal: Gram entry ({row}, {col}) off by {deviation:e}")]
    NotOrthonormal { row: usize, col: usize, deviation: f64 },

    #[error("the derivative of the Hamiltonian vanishes; the counterdiabatic term is zero")]
    ZeroDerivative,

    #[error("Lanczos breakdown at step {step}: b^2 = {value:e}")]
    LanczosBreakdown { step: usize, value: f64 },

    #[error("initial vector is not normalized: norm {0}")]
    NotNormalized(f64),

    #[error("wrong solver route: {0}")]
    WrongRoute(&'static str),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("levels {m} and {n} are degenerate (gap {gap:e}) but coupled by {coupling:e}")]
    DegenerateCoupling { m: usize, n: usize, gap: f64, coupling: f64 },

    #[error("norm identity mismatch: {direct} vs {resolvent}")]
    NormIdentity { direct: f64, resolvent: f64 },

    #[error("empty basis")]
    EmptyBasis,

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("tracked level {level} crosses a neighbour at t = {time} (gap {gap:e})")]
    LevelCrossing { level: usize, time: f64, gap: f64 },

    #[error("step refinement did not converge after {halvings} halvings (change {change:e})")]
    StepRefinement { halvings: usize, change: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CdError>;

impl From<std::io::Error> for CdError {
    fn from(e: std::io::Error) -> Self {
        CdError::Io(e.to_string())
    }
}
