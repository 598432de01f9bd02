use thiserror::Error;

/// Errors produced by the `airgnn` library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("{communities} communities do not evenly divide {n} nodes")]
    CommunitySize { n: usize, communities: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("largest eigenvalue is not positive ({0}); cannot normalize")]
    ZeroSpectralRadius(f64),

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("training diverged at iteration {iter}: loss = {loss}")]
    Diverged { iter: usize, loss: f64 },

    #[error("robots {0} and {1} are coincident")]
    CoincidentRobots(usize, usize),

    #[error("no admissible initial swarm after {0} attempts")]
    ResamplingExhausted(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
