//! Front end of the `mwip` laboratory: configuration, field archives, CSV
//! reports, subcommand drivers and the embedded acceptance suite.

pub mod acceptance;
pub mod archive;
pub mod commands;
pub mod config;
pub mod csvout;
pub mod error;
pub mod experiments;

pub use error::{CliError, CliResult};
