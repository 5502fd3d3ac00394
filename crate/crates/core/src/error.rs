use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient imputations: need at least 2, got {0}")]
    InsufficientImputations(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid quantile request: p = {p}, df = {df}")]
    InvalidQuantile { p: f64, df: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("singular design: auxiliary variable has no variance among complete cases")]
    SingularDesign,

    #[error("insufficient complete cases: need at least 4, got {0}")]
    InsufficientCompleteCases(usize),

    #[error("insufficient data: need at least 2 cases, got {0}")]
    InsufficientData(usize),

    #[error("insufficient replications: need at least {need}, got {got}")]
    InsufficientReplications { need: usize, got: usize },

    #[error("search exhausted: coefficient of variation {best:.6} at m = {m_hi} still above target {target}")]
    SearchExhausted { m_hi: usize, best: f64, target: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("malformed csv: {0}")]
    Format(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
