//! Command line and HTTP front end for the smart house simulator.

pub mod args;
pub mod commands;
pub mod serve;

pub use commands::{Failure, EXIT_INVALID, EXIT_IO, EXIT_RUNTIME};
