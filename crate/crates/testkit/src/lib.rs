//! Test support: an independent brute-force scheduler oracle and seeded
//! generators for randomized projects.
//!
//! Nothing here calls into the engine's flattening or timeline code; the
//! oracle re-derives due events by walking the clock one second at a time.

mod generate;
mod oracle;

pub use generate::{random_project, GenParams};
pub use oracle::{brute_force_timeline, OracleEvent, Toggle};
