use std::path::PathBuf;

/// Errors raised by the geometric, statistical and fitting routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot normalize a zero vector (norm {0:e})")]
    ZeroVector(f64),
    #[error("tangent vector of norm {0} reaches the cut locus")]
    CutLocus(f64),
    #[error("points are antipodal (inner product {0}); logarithm undefined")]
    AntipodalPair(f64),
    #[error("points or vectors live in different charts or dimensions")]
    ChartMismatch,
    #[error("tangent vector is attached to a different base point")]
    BaseMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("data are not contained in an open hemisphere around the iterate")]
    HemisphereViolation,
    #[error("no data point has positive kernel weight (bandwidth too small)")]
    EmptyNeighborhood,
    #[error("covariance has fewer than {k} directions of variation (lambda_k = {lambda:e})")]
    RankDeficient { k: usize, lambda: f64 },
    #[error("step direction is orthogonal to the local frame")]
    DegenerateProjection,
    #[error("landmark configuration is degenerate (all landmarks coincide)")]
    DegenerateConfig,
    #[error("rotation orbit is degenerate (complex inner product {0:e})")]
    DegenerateOrbit(f64),
    #[error("preshape vector is not centered (offset {0:e})")]
    NotCentered(f64),
    #[error("sub-manifold was not fitted on preshape data: {0}")]
    NotAShapeFit(String),
    #[error("lift constant C = {c} leaves a negative radicand {radicand:e}")]
    InfeasibleShift { c: f64, radicand: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
