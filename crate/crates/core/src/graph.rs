//! Weighted communication digraphs.
//!
//! Convention: `adjacency[[i, j]] > 0` iff agent `j` sends information to
//! agent `i`. Consensus terms for agent `i` therefore sum over row `i`.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for weight-balance checks on user-supplied graphs.
pub const BALANCE_TOL: f64 = 1e-9;

/// Eigenvalues at or below this are treated as the Laplacian null space.
pub const LAMBDA2_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    DirectedRing,
    UndirectedRing,
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    adjacency: Array2<f64>,
}

impl Digraph {
    /// Builds a digraph from a square adjacency matrix with nonnegative
    /// entries and zero diagonal.
    pub fn from_adjacency(adjacency: Array2<f64>) -> Result<Self> {
        let (rows, cols) = adjacency.dim();
        if rows == 0 {
            return Err(Error::InvalidGraph("graph has no agents".into()));
        }
        if rows != cols {
            return Err(Error::InvalidGraph(format!(
                "adjacency must be square, got {rows}x{cols}"
            )));
        }
        for ((i, j), &a) in adjacency.indexed_iter() {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "adjacency entry ({i}, {j}) = {a} must be finite and nonnegative"
                )));
            }
            if i == j && a != 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "adjacency diagonal entry ({i}, {i}) = {a} must be zero"
                )));
            }
        }
        Ok(Self { adjacency })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut a = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "adjacency row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                a[[i, j]] = v;
            }
        }
        Self::from_adjacency(a)
    }

    /// Uniformly weighted standard topologies.
    pub fn topology(kind: TopologyKind, n_agents: usize, weight: f64) -> Result<Self> {
        if n_agents < 2 {
            return Err(Error::InvalidParameter(format!(
                "topology needs at least 2 agents, got {n_agents}"
            )));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "edge weight must be positive, got {weight}"
            )));
        }
        let n = n_agents;
        let mut a = Array2::zeros((n, n));
        match kind {
            TopologyKind::DirectedRing => {
                for i in 0..n {
                    a[[i, (i + n - 1) % n]] = weight;
                }
            }
            TopologyKind::UndirectedRing => {
                for i in 0..n {
                    a[[i, (i + n - 1) % n]] = weight;
                    a[[i, (i + 1) % n]] = weight;
                }
            }
            TopologyKind::Complete => {
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            a[[i, j]] = weight;
                        }
                    }
                }
            }
        }
        Self::from_adjacency(a)
    }

    /// A single agent with no edges.
    pub fn singleton() -> Self {
        Self {
            adjacency: Array2::zeros((1, 1)),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> ArrayView2<'_, f64> {
        self.adjacency.view()
    }

    /// Weighted in-degree `d_i = sum_j a_ij` of every node.
    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees().into_iter().fold(0.0, f64::max)
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> Array2<f64> {
        let mut l = -&self.adjacency;
        for (i, d) in self.degrees().into_iter().enumerate() {
            l[[i, i]] = d;
        }
        l
    }

    pub fn is_weight_balanced(&self, tol: f64) -> bool {
        self.balance_violation(tol).is_none()
    }

    fn balance_violation(&self, tol: f64) -> Option<(usize, f64, f64)> {
        (0..self.n_agents()).find_map(|i| {
            let row = self.adjacency.row(i).sum();
            let col = self.adjacency.column(i).sum();
            ((row - col).abs() > tol).then_some((i, row, col))
        })
    }

    pub fn is_strongly_connected(&self) -> bool {
        let n = self.n_agents();
        // Node j reaches i in one hop when a_ij > 0.
        let forward = reachable_from_zero(n, |from, to| self.adjacency[[to, from]] > 0.0);
        let backward = reachable_from_zero(n, |from, to| self.adjacency[[from, to]] > 0.0);
        forward && backward
    }

    /// Checks the graph half of the standing assumptions.
    pub fn validate_assumptions(&self) -> Result<()> {
        if let Some((node, row_sum, col_sum)) = self.balance_violation(BALANCE_TOL) {
            return Err(Error::NotWeightBalanced {
                node,
                row_sum,
                col_sum,
            });
        }
        if !self.is_strongly_connected() {
            return Err(Error::NotStronglyConnected);
        }
        Ok(())
    }

    /// Smallest eigenvalue above [`LAMBDA2_TOL`] of `(L + L^T) / 2`.
    pub fn lambda2(&self) -> Result<f64> {
        let l = self.laplacian();
        let n = self.n_agents();
        let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (l[[i, j]] + l[[j, i]]));
        let eig = sym.symmetric_eigen();
        eig.eigenvalues
            .iter()
            .copied()
            .filter(|&v| v > LAMBDA2_TOL)
            .min_by(f64::total_cmp)
            .ok_or(Error::NoPositiveEigenvalue { tol: LAMBDA2_TOL })
    }

    pub fn is_doubly_stochastic(&self, tol: f64) -> bool {
        (0..self.n_agents()).all(|i| {
            (self.adjacency.row(i).sum() - 1.0).abs() <= tol
                && (self.adjacency.column(i).sum() - 1.0).abs() <= tol
        })
    }

    /// Mixing weights for the discrete-time baselines: same edge pattern,
    /// uniform weight `1/deg`. Requires a symmetric pattern where every node
    /// has the same number of neighbours, so the result is symmetric and
    /// doubly stochastic.
    pub fn mixing(&self) -> Result<Digraph> {
        let n = self.n_agents();
        let a = &self.adjacency;
        let mut degree = None;
        for i in 0..n {
            let mut count = 0usize;
            for j in 0..n {
                let (fwd, bwd) = (a[[i, j]] > 0.0, a[[j, i]] > 0.0);
                if fwd != bwd {
                    return Err(Error::NotDoublyStochastic(format!(
                        "edge pattern is not symmetric at ({i}, {j})"
                    )));
                }
                count += usize::from(fwd);
            }
            match degree {
                None => degree = Some(count),
                Some(d) if d != count => {
                    return Err(Error::NotDoublyStochastic(
                        "uniform 1/deg weights need every node to have the same degree".into(),
                    ))
                }
                _ => {}
            }
        }
        let deg = degree.unwrap_or(0);
        if deg == 0 {
            return Err(Error::NotDoublyStochastic("graph has no edges".into()));
        }
        let w = 1.0 / deg as f64;
        Digraph::from_adjacency(a.mapv(|v| if v > 0.0 { w } else { 0.0 }))
    }
}

fn reachable_from_zero(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for (v, s) in seen.iter_mut().enumerate() {
            if !*s && edge(u, v) {
                *s = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
