use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid H-type structure: {0}")]
    Structure(String),

    #[error("range error: {0}")]
    Range(String),

    #[error(
        "quadrature did not reach tolerance: achieved error {achieved:.3e}, requested {requested:.3e} \
         after {evals} evaluations"
    )]
    Quadrature {
        achieved: f64,
        requested: f64,
        evals: usize,
    },

    /// The λ-Poisson integral of the measure cannot be certified finite.
    #[error(
        "measure is not admissible for beta = {beta}: the tail integral of \
         (16a^2 + d(n)^2/(4 tau^2))^(-beta-rho) against mu is not certified finite ({reason})"
    )]
    Admissibility { beta: f64, reason: String },

    #[error("stencil leaves the half-space a > 0 (a = {a}, step = {step})")]
    Stencil { a: f64, step: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
