use thiserror::Error;

pub type Result<T> = std::result::Result<T, DppError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DppError {
    #[error("scheme {scheme} cannot discretize domain {domain}")]
    InvalidScheme { scheme: String, domain: String },

    #[error("a ground space needs at least one node")]
    ZeroNodes,

    #[error("invalid ground space: {0}")]
    InvalidSpace(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("marking value {value} at node {index} is outside [0, 1]")]
    InvalidMarking { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("constructor needs a {expected} domain, got {got}")]
    WrongDomain { expected: &'static str, got: String },

    #[error("Airy function is not certified at x = {0} (range [-15, 8])")]
    UncertifiedAiryRange(f64),

    #[error("weight function is negative ({value}) at node {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("orthogonalization broke down at degree {degree}: quadrature too coarse")]
    GramBreakdown { degree: usize },

    #[error("kernel is not hermitian (defect {0:e})")]
    NonHermitian(f64),

    #[error("det K(v,v) = {det:e} is below tolerance {tol:e}")]
    NearSingularPalm { det: f64, tol: f64 },

    #[error("det(1 - M_theta K) = {det:e} is below tolerance {tol:e}")]
    SingularResolvent { det: f64, tol: f64 },

    #[error("P(|xi_1| = {m}) = {prob:e} is below tolerance")]
    ZeroProbabilityStratum { m: usize, prob: f64 },

    #[error("observed configuration has probability {0:e}")]
    ZeroProbabilityObservation(f64),

    #[error("kernel does not define a point process: subset probability {0:e}")]
    NotAValidDpp(f64),

    #[error("exhaustive tables are limited to {max} nodes, got {got}")]
    OracleTooLarge { max: usize, got: usize },

    #[error("intensity too large for the grid at node {0}")]
    IntensityTooLarge(usize),

    #[error("eigenvalue {0} lies outside [0, 1] beyond the clipping window")]
    EigenvalueOutOfRange(f64),

    #[error("empty sample batch")]
    EmptyBatch,

    #[error("evaluation point {0} coincides with a pole")]
    PoleEvaluation(f64),

    #[error("dressing matrix is singular at node {0}")]
    SingularY(usize),

    #[error("integrable constraint f^T g = 0 violated at node {index} (residual {residual:e})")]
    ConstraintViolation { index: usize, residual: f64 },

    #[error("no derivative samples and node {0} admits no finite-difference stencil")]
    DerivativeUnavailable(usize),

    #[error("Hankel/Toeplitz moment matrix is ill-conditioned (estimate {0:e})")]
    MomentsIllConditioned(f64),

    #[error("{0}")]
    Precondition(String),
}
