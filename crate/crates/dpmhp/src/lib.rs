//! File formats, experiment drivers and the `dpmhp` command line on top of
//! `dpmhp-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod parallel;

pub use error::{CliError, CliResult};
