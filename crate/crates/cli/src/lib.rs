//! Command-line driver: configuration, subcommands and SVG output.

// `!(x > 0.0)` is the NaN-rejecting form used in validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

pub use error::{CliError, CliResult};
