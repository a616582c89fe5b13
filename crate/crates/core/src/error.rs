//! Crate-wide error type.

/// Errors reported by solvers, checks, and table I/O.
///
/// Times and values are carried as `f64` regardless of the working scalar;
/// they exist for diagnostics, not for further arithmetic.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("initial {name} count n*{name} = {value} is not integral (population {n})")]
    NonIntegerCount { name: &'static str, value: f64, n: u32 },

    #[error("distribution mass {total} deviates from 1 beyond tolerance")]
    Unnormalized { total: f64 },

    #[error("integration accuracy failure at t = {t}: {detail}")]
    IntegrationAccuracy { t: f64, detail: String },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("step budget exhausted at t = {t}")]
    StepBudgetExhausted { t: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("closure value h{index} = {value} outside its legal range")]
    ClosureRange { index: usize, value: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("trajectory table error: {0}")]
    Table(String),

    #[error("distribution error: {0}")]
    Distribution(String),

    #[error("CSV parse error: {0}")]
    CsvFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
