use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a fundamental-diagram function.
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid road parameters: {0}")]
    InvalidParams(String),

    #[error("invalid traffic state: {0}")]
    InvalidState(String),

    #[error("invalid junction: {0}")]
    InvalidJunction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Requested flux exceeds what the road can carry at the given attribute.
    #[error("flux {flux} exceeds capacity {capacity} at attribute w = {w}")]
    Infeasible { flux: f64, capacity: f64, w: f64 },

    /// A root-finder or fixed-point iteration failed. Carries enough context to reproduce.
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: &'static str, detail: String },

    #[error("CFL violation: dt = {dt} exceeds stable step {dt_max} on road {road}")]
    Cfl { dt: f64, dt_max: f64, road: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),
}
