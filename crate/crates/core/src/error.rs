use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not skew-symmetric (defect {defect:.3e})")]
    NotSkewSymmetric { defect: f64 },

    #[error("quaternion norm {norm} deviates from 1")]
    NonUnitQuaternion { norm: f64 },

    #[error("matrix is not a rotation (defect {defect:.3e})")]
    NotARotation { defect: f64 },

    #[error("determinant {det:.6e} is not positive")]
    NonPositiveDeterminant { det: f64 },

    #[error("matrix is rank deficient (smallest singular value {smallest:.3e})")]
    RankDeficient { smallest: f64 },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("singular values must be finite with non-negative pairwise sums, got {0:?}")]
    InvalidSingularValues([f64; 3]),

    #[error("vector must have unit length, got norm {norm}")]
    NonUnitVector { norm: f64 },

    #[error("axis index {0} out of range (expected 0, 1 or 2)")]
    InvalidAxis(usize),

    #[error("spread parameter {sigma} is infeasible for axis {axis}: cos(theta) = {cos_theta}")]
    InfeasibleSpread { axis: usize, sigma: f64, cos_theta: f64 },

    #[error("sigma points are undefined for a degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("moment {0:?} is not attainable by a matrix Fisher distribution")]
    InfeasibleMoment([f64; 3]),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("measurement stream error: {0}")]
    Stream(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
