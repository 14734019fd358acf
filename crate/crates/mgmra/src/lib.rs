//! File formats, run configuration and the command-line driver around
//! [`mgmra_core`].

mod bytes;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod report;

pub use error::{exit, Error, Result};
