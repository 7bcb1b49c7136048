//! Core library for a small computational laboratory of random spatial models:
//! self-avoiding walks, lattice and continuum mirror billiards, exact
//! small-graph inequality checks, randomly oriented lattices, and moving-particle
//! epidemics.
//!
//! Everything stochastic runs off explicit `(master_seed, stream_id)` pairs so
//! that experiments are reproducible bit-for-bit regardless of how work is
//! scheduled across threads.

pub mod bunkbed;
pub mod epidemic;
pub mod forests;
pub mod graphs;
pub mod lattice;
pub mod mirrors;
pub mod needles;
pub mod oriented;
pub mod randstat;
pub mod saw;
pub(crate) mod util;

pub use randstat::{EstimateCI, RngStream};

/// Crate-wide error type. Variants are coarse on purpose: callers mostly want
/// the message and, for the CLI, the distinction between "bad input" and
/// "internal failure".
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
