//! Command-line driver for the FPIA toolchain: problem corpus handling,
//! single-problem subcommands and experiment campaigns.

pub mod campaign;
pub mod commands;
pub mod corpus;

pub use commands::{CliError, EXIT_INFEASIBLE, EXIT_OK, EXIT_OTHER, EXIT_VERIFY};
