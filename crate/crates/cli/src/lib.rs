//! Batch front end: scenario files, simulation, κ-sweeps, the invariant
//! suite and metric/connection tables.

pub mod commands;
pub mod error;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use scenario::Scenario;
