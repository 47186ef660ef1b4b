use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("party count {n} out of range (must be between {min} and {max})")]
    PartyCountOutOfRange { n: usize, min: usize, max: usize },

    #[error("amplitude vector has length {found}, expected {expected}")]
    AmplitudeLength { expected: usize, found: usize },

    #[error("state norm deviates from 1 by {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("Bloch vector norm deviates from 1 by {deviation:e}")]
    NotUnitVector { deviation: f64 },

    #[error("Bloch vector has vanishing norm")]
    ZeroVector,

    #[error("dimension mismatch: {context} has {found} parties, expected {expected}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("visibility {0} outside [0, 1]")]
    VisibilityOutOfRange(f64),

    #[error("table has length {found}, expected {expected} (= 2^n)")]
    TableLength { expected: usize, found: usize },

    #[error("weight table is identically zero")]
    ZeroWeightTable,

    #[error("table contains a non-finite value at index {0}")]
    NonFiniteValue(usize),

    #[error("sign table entry at index {index} is {value}, expected +1 or -1")]
    InvalidSign { index: usize, value: i8 },

    #[error("{context} requires an even party count, got {n}")]
    OddPartyCount { context: &'static str, n: usize },

    #[error("{context} requires an odd party count, got {n}")]
    EvenPartyCount { context: &'static str, n: usize },

    #[error("party count {n} exceeds the enumeration cap {cap}; raise the cap to proceed")]
    EnumerationCapExceeded { n: usize, cap: usize },

    #[error("strategy ensemble is empty")]
    EmptyEnsemble,

    #[error("ensemble weights must be non-negative and sum to 1 (sum was {sum})")]
    BadEnsembleWeights { sum: f64 },

    #[error("simulation requires at least one round")]
    ZeroRounds,

    #[error("grid resolution {m} invalid: must be even and at least {min}")]
    BadGridResolution { m: usize, min: usize },

    #[error("grid with {points} points is too large for a general-state quadrature (cap {cap})")]
    GridTooLarge { points: u128, cap: u128 },

    #[error("malformed file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
