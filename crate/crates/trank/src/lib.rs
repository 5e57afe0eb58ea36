//! File formats, synthetic workloads, benchmarks and the command-line
//! front end for [`trank_core`].

pub mod cli;
pub mod eval;
pub mod format;
pub mod index;
pub mod store;

pub use index::{AnyIndex, BuildParams, MethodTag};
pub use store::FileStore;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] trank_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
