use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported clause arity {arity} at line {line} (only 3-SAT is supported)")]
    UnsupportedArity { line: usize, arity: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in row {row}: {msg}")]
    Numeric { row: usize, msg: String },

    #[error("instance too large for exhaustive search: {n} variables (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    Eigen { iterations: usize, residual: f64 },

    #[error("training diverged at step {step} (instance seed {instance_seed}): {msg}")]
    Training {
        step: usize,
        instance_seed: u64,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
