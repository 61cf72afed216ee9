use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid rate {0}: must be positive and finite")]
    InvalidRate(f64),

    #[error("invalid blocklength: n = {n} (needs n >= 100), k = {k} (needs k > 0)")]
    InvalidBlocklength { n: u32, k: f64 },

    #[error("transmit power must be positive and finite, got {value} in round {round}")]
    NonPositivePower { round: usize, value: f64 },

    #[error("empty power schedule")]
    EmptySchedule,

    #[error("target outage {0} outside (0, 1)")]
    InvalidTarget(f64),

    #[error("round count {0} outside [1, {max}]", max = crate::allocator::MAX_ROUNDS)]
    InvalidRounds(usize),

    #[error("model {0} needs a blocklength (n, K)")]
    MissingBlocklength(&'static str),

    #[error(
        "psi coefficient {index} is {value} at rate argument {rate}; IR-HARQ law needs every coefficient positive"
    )]
    NonPositivePsi { index: usize, rate: f64, value: f64 },

    #[error("protocol mismatch: expected {expected}, request carries {found}")]
    ProtocolMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("quadrature failed to reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("numeric oracle did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("invalid configuration: {0}")]
    Config(String),
}
