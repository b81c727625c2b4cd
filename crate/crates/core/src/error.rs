use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("level out of bounds: {0}")]
    LevelOutOfBounds(String),
    #[error("no unit part: zero input")]
    NoUnitPart,
    #[error("zero is not an element of the multiplicative group")]
    ZeroInput,
    #[error("singular matrix")]
    Singular,
    #[error("matrix is not unimodular (determinant {0})")]
    NotUnimodular(String),
    #[error("window too coarse: base points {0} and {1} both lie within the window around {2}")]
    WindowTooCoarse(String, String, String),
    #[error("base set rejected: {0}")]
    BadBaseSet(String),
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("ladder exhausted: need {need} rungs above index {from}, ladder has {have}")]
    LadderExhausted {
        need: usize,
        from: usize,
        have: usize,
    },
    #[error("degenerate factorization: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("witness left the expected family: {0}")]
    OutsideFamily(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
