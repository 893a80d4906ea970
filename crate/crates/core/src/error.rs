use thiserror::Error;

/// Errors raised by model construction and the solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("not a probability vector: {0}")]
    InvalidDistribution(String),

    #[error("row {row} of the transition matrix is not a distribution: {reason}")]
    InvalidChannel { row: usize, reason: String },

    #[error("invalid decoding metric: {0}")]
    InvalidMetric(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dual potential `{0}` must be strictly positive and finite")]
    NonPositivePotential(&'static str),

    #[error("row {row} of the Gibbs kernel carries no mass (every reachable metric entry is forbidden)")]
    DegenerateKernelRow { row: usize },

    #[error("column {column} of the Gibbs kernel carries no mass")]
    DegenerateKernelColumn { column: usize },

    #[error("metric multiplier root not bracketed below {limit:e}; the metric constraint cannot be met")]
    ZetaNotBracketed { limit: f64 },

    #[error("power multiplier root not bracketed below {limit:e}; minimum symbol power {min_power} exceeds the limit {limit_power}")]
    MuNotBracketed {
        limit: f64,
        min_power: f64,
        limit_power: f64,
    },

    #[error("input update is degenerate: every coefficient J_i vanished")]
    DegenerateInput,

    #[error("relay row {row} has no admissible output symbol")]
    DegenerateRelayRow { row: usize },

    #[error("power constraint requires constellation points on the input alphabet")]
    MissingConstellation,

    #[error("channel row {row} underflowed entirely; enlarge the grid half-width or lower the SNR")]
    GridUnderflow { row: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
