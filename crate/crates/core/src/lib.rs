//! Distributed projection-free (Frank-Wolfe) dynamics for constrained
//! multi-agent optimization over weight-balanced digraphs.
//!
//! Each agent `i` holds a decision variable `x_i` in a compact convex set
//! and a gradient-tracking variable `y_i`. Agents average with neighbours
//! and step toward the vertex returned by a linear minimization oracle,
//! so no projection is ever solved. [`baselines`] holds discrete-time and
//! projection-based comparison algorithms; [`metrics`] the diagnostics.

pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod objective;
pub mod set;

pub use dynamics::{IntegratorConfig, InitialState, Method, Network, NetworkState, Schedule};
pub use error::{Error, Result};
pub use graph::{Digraph, TopologyKind};
pub use metrics::{Reference, RunRecord};
pub use objective::{Objective, QuadraticCost};
pub use set::FeasibleSet;
