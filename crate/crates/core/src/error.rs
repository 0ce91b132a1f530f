use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("affine map is singular")]
    SingularMap,
    #[error("polynomial is identically zero on the domain")]
    IdenticallyZero,
    #[error("function is degenerate: {0}")]
    DegenerateFunction(String),
    #[error("set is empty")]
    EmptySet,
    #[error("newton iteration failed to converge at x = {0}")]
    NewtonDivergence(f64),
    #[error("parallelogram is degenerate")]
    DegenerateParallelogram,
    #[error("rectangles do not intersect")]
    EmptyIntersection,
    #[error("recursion budget exceeded: {0}")]
    RecursionBudgetExceeded(String),
    #[error("no point with a large Hessian eigenvalue")]
    NoCurvature,
    #[error("coefficient bound violated: {0}")]
    BoundViolated(String),
    #[error("recursion overflow: {0}")]
    RecursionOverflow(String),
    #[error("scale too coarse: remainder bound {bound} exceeds {limit}")]
    ScaleTooCoarse { bound: f64, limit: f64 },
    #[error("sampler failure: {0}")]
    SamplerFailure(String),
    #[error("frequency alias collision in bin {0:?}")]
    AliasCollision([i64; 3]),
    #[error("fft grid too small: need {need}, have {have}")]
    GridTooSmall { need: usize, have: usize },
    #[error("certificate failure: {0}")]
    CertificateFailure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
