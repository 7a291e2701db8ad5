use num_complex::Complex64;
use thiserror::Error;

use crate::dimensions::Rect;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid generator profile: {0}")]
    InvalidProfile(String),

    #[error("path enumeration needs a positive ratio threshold, got {0}")]
    NonPositiveThreshold(f64),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("symbolic determinant capped at dimension {cap}, got {dim}")]
    DimensionTooLarge { dim: usize, cap: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("s = {s} lies within {radius:e} of the Mellin pole at {pole}")]
    PoleProximity { s: Complex64, pole: i64, radius: f64 },

    #[error("power iteration did not converge after {iterations} iterations")]
    PowerIteration { iterations: usize },

    #[error("Perron vector has non-positive entry {value:e} at index {index}")]
    NonPositivePerron { index: usize, value: f64 },

    #[error("sim-value bracket search failed: spectral radius stays >= 1 up to s = {s_hi}")]
    BracketNotFound { s_hi: f64 },

    #[error("infinite total volume: sim-value {dim} is not below the space dimension {space_dimension}")]
    InfiniteVolume { dim: f64, space_dimension: usize },

    #[error("sim-value {dim} violates n-1 < D < n for n = {space_dimension}")]
    SimValueOutOfRange { dim: f64, space_dimension: usize },

    #[error("minimal-base coefficient cancels in the determinant; dominance bound unavailable")]
    DominanceUnavailable,

    #[error("determinant has no constant term; right abscissa unavailable")]
    NoConstantTerm,

    #[error("winding number undefined: determinant vanishes on the boundary of {0:?}")]
    BoundaryZero(Rect),

    #[error("zero isolation did not converge within depth cap in {0:?}")]
    IsolationFailed(Rect),

    #[error("pole at {omega} has multiplicity {multiplicity}; only simple poles are supported")]
    HigherOrderPole { omega: Complex64, multiplicity: usize },

    #[error("complex dimension {omega} collides with integer pole {pole}")]
    PoleCollision { omega: Complex64, pole: i64 },

    #[error("det(I - A({pole})) = {det:e} is too close to zero")]
    DegeneratePole { pole: i64, det: f64 },

    #[error("s = {0} is too close to a zero of the determinant")]
    NearDimension(Complex64),

    #[error("singular linear system")]
    Singular,

    #[error("path budget exceeded at eps = {eps:e}: predicted ~{predicted:.3e} paths, cap {cap}")]
    PathCapExceeded { eps: f64, predicted: f64, cap: u64 },

    #[error("lattice-grouped evaluation requested but edge ratios are non-lattice")]
    NotLattice,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
