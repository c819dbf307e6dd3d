//! Command line front end for `qosgame`: JSON scenarios in, CSV tables and
//! JSON summaries out.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;
pub mod validate;

pub use commands::Report;
pub use error::{CliError, Result};
pub use scenario::Scenario;
