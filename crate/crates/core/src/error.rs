use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller supplied parameters outside an operation's domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    /// A threshold equation could not be bracketed or failed its sanity check.
    #[error("root solver failed: {0}")]
    Solver(String),

    /// Sequential jumps did not reach the closed waiting region.
    #[error("sequential jumps did not terminate after {0} steps")]
    NonTermination(usize),

    /// The per-step oblique projection did not settle.
    #[error("oblique projection did not settle after {rounds} rounds at step {step} of path {path}")]
    Projection { path: usize, step: usize, rounds: usize },

    /// Malformed cost table.
    #[error("cost table: {0}")]
    Table(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for errors caused by the caller's parameters rather than by numerics.
    pub fn is_input(&self) -> bool {
        matches!(self, Error::Input(_) | Error::Table(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
