use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Survey update with vanishing normalisation on directed edge `edge`
    /// (`from -> to`).
    #[error("contradiction on directed edge {from}->{to} (Z = {z:e})")]
    Contradiction { from: usize, to: usize, z: f64 },

    #[error("no convergence after {0} updates")]
    NoConvergence(usize),

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
