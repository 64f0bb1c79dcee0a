use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum NrmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state underflow on leg {leg}: {have} remaining, {need} requested")]
    StateUnderflow { leg: usize, have: u32, need: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error(
        "state space too large for exact value iteration ({states} period-states > cap {cap}); \
         use the approximate pipeline instead"
    )]
    StateSpaceTooLarge { states: u128, cap: u128 },

    #[error("incomplete value table: {0}")]
    IncompleteTable(String),

    #[error("degenerate ridge direction: beta has zero weighted norm")]
    DegenerateDirection,

    #[error("stale duals: {0}")]
    StaleDuals(String),

    #[error("row generation stalled in period {period}: separated rows are already in the master")]
    Stall { period: usize },

    #[error("linear program is {0}")]
    LpStatus(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NrmError>;
