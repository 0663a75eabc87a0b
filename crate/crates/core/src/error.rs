use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constraint set has empty interior")]
    EmptyInterior,

    #[error("constraint set must contain the origin")]
    OriginExcluded,

    #[error("all {n_paths} simulated paths violated wealth positivity")]
    AllPathsRejected { n_paths: usize },

    #[error("point lies on the boundary of the jump-admissible region (1 + y.x = {margin:e})")]
    DomainBoundary { margin: f64 },

    #[error("objective is unbounded above (|y| > {cap:e} along an increasing ray); supremum estimate {sup_estimate}")]
    UnboundedAbove { cap: f64, sup_estimate: f64 },

    #[error("closed-form opportunity process requires a > -1, got a = {0}")]
    InvalidA(f64),

    #[error("ODE step lost positivity of L at t = {t} after {retries} step halvings")]
    StepPositivityLoss { t: f64, retries: usize },

    #[error("unsupported exponent ordering for constant transfer: q = {q}, q1 = {q1}")]
    RegimeMismatch { q: f64, q1: f64 },

    #[error("unknown experiment tag `{0}`")]
    UnknownTag(String),

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
