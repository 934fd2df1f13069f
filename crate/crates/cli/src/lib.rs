//! Batch front end for the tubular tree extraction pipeline.
//!
//! Library surface behind the `tubetrack` binary; the acceptance suite calls
//! these entry points directly.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
