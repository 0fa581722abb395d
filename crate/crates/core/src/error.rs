use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed element: expected {expected} coordinates, got {got}")]
    MalformedElement { expected: usize, got: usize },

    #[error("integer overflow in group arithmetic")]
    Overflow,

    #[error("invalid group descriptor: {0}")]
    InvalidSpec(String),

    #[error("subsets belong to different groups")]
    OwnerMismatch,

    #[error("ball of radius {radius} exceeds budget of {budget} elements")]
    BudgetExceeded { radius: u32, budget: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("sample exhausted: found {found} of {requested} admissible translates")]
    ExhaustedSample { found: usize, requested: usize },

    #[error("window too small: {0}")]
    WindowTooSmall(String),

    #[error("no family index N <= {max_index} with F_n^2 contained in F_N")]
    StrongUnavailable { max_index: u64 },

    #[error("castle defect: {0}")]
    CastleDefect(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("invalid family descriptor: {0}")]
    InvalidFamily(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
