use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid fixed-point format Q({total},{frac})")]
    Format { total: u32, frac: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    /// The squared norm handed to the inverse square root was zero.
    #[error("degenerate norm: inverse square root of zero")]
    DegenerateNorm,
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("target BER {0:e} is not bracketed by both curves")]
    NotBracketed(f64),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
