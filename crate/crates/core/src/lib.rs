pub mod bitio;
pub mod cli;
pub mod codecs;
pub mod error;
pub mod exec;
pub mod hwmodel;
pub mod metrics;
pub mod scheduler;
pub mod stream;
pub mod workload;

pub use error::{Error, Result};
