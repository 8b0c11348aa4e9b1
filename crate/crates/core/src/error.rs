use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("CGPT order must be at least 1, got {0}")]
    InvalidOrder(usize),

    #[error("under-determined system: {n} receivers cannot resolve order {k} (need N >= 2K)")]
    Underdetermined { n: usize, k: usize },

    #[error("left inverse needs N > 2K, got N = {n}, K = {k}")]
    LeftInverseOrder { n: usize, k: usize },

    #[error("rho = R/delta must exceed 1, got {0}")]
    TargetNotEnclosed(f64),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("operation requires a uniform full-view (gamma = 2pi) array")]
    NotFullView,

    #[error("degenerate geometry: numerical rank {rank} of C D is below {expected}")]
    DegenerateGeometry { rank: usize, expected: usize },

    #[error("acquisition angles must be distinct (indices {0} and {1} coincide)")]
    CoincidentAngles(usize, usize),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("first-order motion relations are not defined: {0}")]
    DegenerateRatios(&'static str),

    #[error("target leaves the measurement ring at frame {frame}: |z| + delta = {extent} >= R = {radius}")]
    ContainmentViolation {
        frame: usize,
        extent: f64,
        radius: f64,
    },

    #[error("innovation covariance is singular ({0})")]
    SingularInnovation(String),

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn mismatch(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn at_frame(self, index: usize) -> Self {
        Error::Frame {
            index,
            source: Box::new(self),
        }
    }
}
