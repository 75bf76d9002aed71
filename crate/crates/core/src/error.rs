use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("power-dual bisection at AP {ap} did not converge after {iterations} iterations (relative power error {rel_error:.3e})")]
    BisectionFailed {
        ap: usize,
        iterations: usize,
        rel_error: f64,
    },

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("IBT resources {r_ibt} exceed the block size {r_tot}")]
    ResourceOverflow { r_ibt: f64, r_tot: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("drop {drop}, block {block}, method {method}: {source}")]
    Context {
        drop: usize,
        block: usize,
        method: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn with_context(self, drop: usize, block: usize, method: impl Into<String>) -> Self {
        Error::Context {
            drop,
            block,
            method: method.into(),
            source: Box::new(self),
        }
    }
}
