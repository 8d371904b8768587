use thiserror::Error;

/// Errors raised by the library. Variants mirror the failure modes each
/// operation documents.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{a} is not invertible modulo {q}")]
    NonInvertible { a: i64, q: u64 },
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("no admissible prime in [{lo}, {hi}]")]
    EmptyRange { lo: u64, hi: u64 },
    #[error("{m1} does not divide modulus {q}")]
    InvalidDivisor { m1: u64, q: u64 },
    #[error("dyadic ranges [{q1}, {}] and [{q2}, {}] overlap", 2 * q1, 2 * q2)]
    OverlappingRanges { q1: u64, q2: u64 },
    #[error("moduli collection is empty: {0}")]
    EmptyCollection(String),
    #[error("duplicate modulus {0} in moduli set")]
    DuplicateModulus(u64),
    #[error("weight {0} is not supported (only k = 12)")]
    UnsupportedWeight(u32),
    #[error("base table of length {have} cannot support length {need}")]
    InsufficientBase { have: usize, need: usize },
    #[error("argument {value} outside table range {limit}")]
    OutOfRange { value: u64, limit: u64 },
    #[error("coefficient table of length {have} is shorter than required {need}")]
    TableTooShort { have: usize, need: usize },
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("gamma factor overflow at {0}")]
    GammaOverflow(String),
    #[error("need at least {need} points, got {have}")]
    InsufficientPoints { need: usize, have: usize },
    #[error("delta = {delta} outside admissible range [{lo}, {hi}]")]
    DeltaOutOfRange { delta: f64, lo: f64, hi: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
