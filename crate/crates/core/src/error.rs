use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad bit count, value too wide, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sink is not byte-aligned (bit_len = {bit_len})")]
    Unaligned { bit_len: u64 },

    #[error("end of stream: needed {needed} bits, {available} remaining")]
    EndOfStream { needed: u64, available: u64 },

    #[error("invalid frame: {0}")]
    Frame(String),

    #[error("unknown codec: {0}")]
    UnknownCodec(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("corrupt stream: {0}")]
    Corrupt(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    Metric(String),

    #[error("roofline fit failed: {0}")]
    Fit(String),

    #[error("missing cost data: {0}")]
    Cost(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("worker failed: {0}")]
    Worker(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
