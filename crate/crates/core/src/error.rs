use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (supported: 1..=3)")]
    UnsupportedDimension(usize),

    #[error("no value at corner {0:?}")]
    MissingCorner(Vec<f64>),

    #[error("point {point:?} outside declared domain [{lower:?}, {upper:?}]")]
    OutsideDomain { point: Vec<f64>, lower: Vec<f64>, upper: Vec<f64> },

    #[error("exponent argument {x} outside [{lo}, {hi}]")]
    ExponentOutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("quadrature did not converge (partial estimate {partial}, error estimate {error})")]
    Quadrature { partial: f64, error: f64 },

    #[error("invalid hurst function: {0}")]
    InvalidHurst(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("lattice has {points} points, above the cap of {cap}; reduce the grid resolution")]
    CapExceeded { points: usize, cap: usize },

    #[error("factorization failed at maximum jitter {jitter:e}; most negative eigenvalue estimate {min_eigenvalue:e}")]
    Factorization { jitter: f64, min_eigenvalue: f64 },

    #[error("too few replicates: need at least {needed}, got {got}")]
    TooFewReplicates { needed: usize, got: usize },

    #[error("estimator needs {needed} usable radii, only {got} available")]
    InsufficientRadii { needed: usize, got: usize },

    #[error("ray leaves the lattice: {0}")]
    RayOffLattice(String),

    #[error("singular point: {0}")]
    Singular(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::Factorization { .. } | Error::Singular(_))
    }
}
