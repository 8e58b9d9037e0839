use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("method mismatch: {0}")]
    MethodMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("singular: {0}")]
    Singular(String),
    #[error("operator is not sectorial: {0}")]
    NotSectorial(String),
    #[error("operator does not generate an analytic semigroup: {0}")]
    NotAnalytic(String),
    #[error("decay certificate failed: {0}")]
    Certificate(String),
    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("smallness condition violated: contraction factor {factor:.6} >= 1")]
    SmallnessViolation { factor: f64 },
    #[error("picard iteration diverged at iteration {iter}")]
    Divergence { iter: usize },
    #[error("interval could not be split below tolerance within depth {depth}")]
    NonSplittable { depth: usize },
    #[error("declared constant violated: {0}")]
    SpecViolation(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
