use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("complex dimension n = {0} is not supported (expected 2 or 3)")]
    UnsupportedDimension(usize),
    #[error("grid resolution N = {0} must be even and at least 4")]
    InvalidResolution(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field is not Hermitian: defect {defect:.3e} exceeds tolerance")]
    NotHermitian { defect: f64 },
    #[error("field is not real: imaginary part {residue:.3e} exceeds tolerance")]
    NotReal { residue: f64 },
    #[error("wavevector has {got} entries, expected {expected}")]
    BadWavevector { expected: usize, got: usize },
    #[error("wavevector {wavevector:?} is not resolved at N = {resolution} (need |k| < N/2)")]
    UnresolvedMode {
        wavevector: Vec<i64>,
        resolution: usize,
    },
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("k = {k} must satisfy 1 <= k <= n-1 = {}", n - 1)]
    InvalidK { k: usize, n: usize },
    #[error("gamma = {0} must be positive")]
    InvalidGamma(f64),
    #[error("alpha' must be nonzero")]
    ZeroAlpha,
    #[error("normalization M = {0} must be finite and at least 1")]
    InvalidScale(f64),
    #[error("mu must integrate to zero: measured mean {mean:.6e}")]
    MuNotZeroMean { mean: f64 },
    #[error("p = {p} must exceed gamma = {gamma}")]
    ExponentTooSmall { p: f64, gamma: f64 },
    #[error("this check requires k = 1 and gamma = 2 (got k = {k}, gamma = {gamma})")]
    RequiresStandardCase { k: usize, gamma: f64 },
    #[error("manufactured state is outside the admissible set: m1 = {m1:.3e}, m2 = {m2:.3e}")]
    InadmissibleState { m1: f64, m2: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which admissibility margin failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Margin {
    /// `e^{-γu} < δ`
    Exponential,
    /// `|α'| |e^{-u} i∂∂̄u|^k < τ`
    Hessian,
}

impl std::fmt::Display for Margin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Margin::Exponential => write!(f, "m1 (e^(-gamma u) < delta)"),
            Margin::Hessian => write!(f, "m2 (|alpha'| |e^(-u) i ddbar u|^k < tau)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("starting point is outside the admissible set: m1 = {m1:.3e}, m2 = {m2:.3e}")]
    InadmissibleStart { m1: f64, m2: f64 },
    #[error("Newton did not converge in {iters} iterations (residual {residual:.3e})")]
    MaxItersExceeded { iters: usize, residual: f64 },
    #[error("iterate left the admissible set: m1 = {m1:.3e}, m2 = {m2:.3e}")]
    LeftAdmissibleSet { m1: f64, m2: f64 },
    #[error("line search could not reduce the residual below {residual:.3e}")]
    LineSearchFailed { residual: f64 },
    #[error(
        "Krylov solver stalled after {iters} iterations (relative residual {rel_residual:.3e})"
    )]
    KrylovStall { iters: usize, rel_residual: f64 },
    #[error("right-hand side violates compatibility: mean {mean:.3e}")]
    IncompatibleRhs { mean: f64 },
    #[error("continuation step floor reached at t = {last_t} ({cause})")]
    StepFloorReached {
        last_t: f64,
        cause: String,
        violated: Option<Margin>,
    },
    #[error("two admissible solutions differ by {distance:.3e}")]
    NonUniqueCandidate { distance: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
