//! Configuration loading, experiment orchestration and CSV output for the
//! distributed projection-free dynamics in `dcpf-core`.
//!
//! An experiment is one TOML file. `run` executes a single algorithm,
//! `compare` runs several on one shared instance, and `bench` times the
//! linear minimization oracle against the polytope projection.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{Algorithm, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use experiment::{Instance, Outcome, RunOptions};
