use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid demand model: {0}")]
    InvalidDemand(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("depletion did not terminate within {cap} draws (mean demand too close to zero)")]
    DepletionCapExceeded { cap: u64 },

    #[error("level {level} and demand support are not commensurate on a common grid")]
    NotCommensurate { level: f64 },

    #[error("reachable state count exceeds cap of {cap}")]
    StateCapExceeded { cap: usize },

    #[error("base-stock chain at level {level} has {classes} closed classes")]
    NotUnichain { level: f64, classes: usize },

    #[error("base-stock chain at level {level} is periodic with period {period}")]
    PeriodicChain { level: f64, period: usize },

    #[error("stationary distribution did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("states have unequal entry sums ({left} vs {right})")]
    UnequalSums { left: f64, right: f64 },

    #[error("learner horizon of {horizon} steps exhausted")]
    HorizonExhausted { horizon: u64 },

    #[error("epoch count {epochs} exceeds log_4/3(T) = {bound:.3}")]
    EpochBoundExceeded { epochs: u32, bound: f64 },

    #[error("oracle grid does not bracket the minimum: argmin {level} sits on the grid edge inside [0, {upper}]")]
    OracleNotBracketed { level: f64, upper: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
