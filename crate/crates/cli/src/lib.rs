//! Command-line front end for `flagagg-core`: training runs, one-shot
//! aggregation, verification suites and image augmentation.

pub mod commands;
pub mod config;
mod error;
pub mod verify;

pub use error::{CliError, CliResult};
