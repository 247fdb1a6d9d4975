use thiserror::Error;

/// Errors raised by the simulation and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a domain invariant (negative value, infeasible allocation, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An exhaustive enumeration would exceed its guard.
    #[error("capacity error: {what} needs {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    /// The bidder's allocation was not a monotone step in its own value.
    #[error("monotonicity violation for bidder {bidder}: packed at {packed_at}, unpacked at {unpacked_at}")]
    MonotonicityViolation {
        bidder: usize,
        packed_at: f64,
        unpacked_at: f64,
    },

    /// A learner was fed something outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An instance or experiment was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown identifier: {0}")]
    UnknownId(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
