use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} lies outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("value count {values} does not match grid size {grid}")]
    LengthMismatch { values: usize, grid: usize },

    #[error("paths live on different grids")]
    GridMismatch,

    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("path is not in Omega: {0}")]
    NotInOmega(String),

    #[error("precondition violated: {0}")]
    Contract(String),

    #[error("tree construction failed: {0}")]
    TreeConstruction(String),

    #[error("invalid tree path index: {0}")]
    InvalidPathIndex(String),

    #[error("enumeration guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("empty prediction set discretization")]
    EmptyRetained,

    #[error("payoff needs an unrolled tree: {0}")]
    NeedsUnroll(String),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("hedge verification failed: {0}")]
    HedgeVerification(String),

    #[error("unknown registered name: {0}")]
    UnknownName(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
