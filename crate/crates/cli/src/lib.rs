//! Batch front-end for the coupled NLS toolkit: configuration, the five
//! subcommands and their result files.

pub mod commands;
pub mod config;
pub mod io;
pub mod validate;

pub use commands::{CliError, Options};
pub use config::RunConfig;
