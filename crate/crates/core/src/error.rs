use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("assumption violated: digraph is not weight-balanced (node {node}: out {row_sum}, in {col_sum})")]
    NotWeightBalanced {
        node: usize,
        row_sum: f64,
        col_sum: f64,
    },

    #[error("assumption violated: digraph is not strongly connected")]
    NotStronglyConnected,

    #[error("mixing matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),

    #[error("no eigenvalue of the symmetrized Laplacian exceeds {tol:e}")]
    NoPositiveEigenvalue { tol: f64 },

    #[error("invalid feasible set: {0}")]
    InvalidSet(String),

    #[error("invalid cost: {0}")]
    InvalidCost(String),

    #[error("assumption violated: initial point of agent {agent} is not in the feasible set")]
    InfeasibleInitialState { agent: usize },

    #[error("step size {h} exceeds the feasibility bound {bound}")]
    StepBound { h: f64, bound: f64 },

    #[error("polytope projection did not converge after {iters} iterations (residual {residual:e})")]
    ProjectionNotConverged { iters: usize, residual: f64 },

    #[error("reference solver did not reach FW gap {tol:e} after {iters} iterations (gap {gap:e})")]
    ReferenceNotConverged { iters: usize, gap: f64, tol: f64 },

    #[error("optimality gap {gap:e} is negative beyond slack; reference solution is wrong")]
    BrokenReference { gap: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

impl Error {
    /// Numeric failures, as opposed to bad inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::ProjectionNotConverged { .. }
                | Error::ReferenceNotConverged { .. }
                | Error::BrokenReference { .. }
                | Error::NoPositiveEigenvalue { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
