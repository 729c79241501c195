//! Local quadratic costs `f_i(x) = 0.5 x^T Q x + b^T x + c` and their
//! network average `F = (1/N) sum_i f_i`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::set::FeasibleSet;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    q: Array2<f64>,
    b: Array1<f64>,
    c: f64,
}

impl QuadraticCost {
    /// Validates that `q` is square, symmetric and positive semidefinite.
    pub fn new(q: Array2<f64>, b: Array1<f64>, c: f64) -> Result<Self> {
        let (rows, cols) = q.dim();
        if rows == 0 || rows != cols {
            return Err(Error::InvalidCost(format!(
                "Q must be square and nonempty, got {rows}x{cols}"
            )));
        }
        check_dim(rows, b.len())?;
        if q.iter().chain(b.iter()).any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::InvalidCost("coefficients must be finite".into()));
        }
        for i in 0..rows {
            for j in 0..i {
                if (q[[i, j]] - q[[j, i]]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidCost(format!(
                        "Q is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let cost = Self { q, b, c };
        let min_eig = cost.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidCost(format!(
                "Q is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(cost)
    }

    /// `||x - center||^2 * scale / 2`, i.e. `Q = scale I`.
    pub fn isotropic(center: &[f64], scale: f64) -> Result<Self> {
        let n = center.len();
        let q = Array2::eye(n) * scale;
        let b = Array1::from_iter(center.iter().map(|v| -scale * v));
        let c = 0.5 * scale * center.iter().map(|v| v * v).sum::<f64>();
        Self::new(q, b, c)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn q(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let x = ndarray::ArrayView1::from(x);
        0.5 * x.dot(&self.q.dot(&x)) + self.b.dot(&x) + self.c
    }

    /// `Q x + b`.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.grad_into(x, &mut out)?;
        Ok(out)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), out.len())?;
        for ((o, row), bk) in out.iter_mut().zip(self.q.rows()).zip(&self.b) {
            *o = row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + bk;
        }
        Ok(())
    }

    fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |i, j| self.q[[i, j]]);
        m.symmetric_eigen().eigenvalues.iter().copied().collect()
    }

    /// Lipschitz constant of the gradient, `lambda_max(Q)`.
    pub fn lipschitz(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    costs: Vec<QuadraticCost>,
}

impl Objective {
    pub fn new(costs: Vec<QuadraticCost>) -> Result<Self> {
        let first = costs
            .first()
            .ok_or_else(|| Error::InvalidCost("objective needs at least one cost".into()))?;
        let n = first.dim();
        for cost in &costs {
            check_dim(n, cost.dim())?;
        }
        Ok(Self { costs })
    }

    pub fn n_agents(&self) -> usize {
        self.costs.len()
    }

    pub fn dim(&self) -> usize {
        self.costs[0].dim()
    }

    pub fn costs(&self) -> &[QuadraticCost] {
        &self.costs
    }

    /// `F(x) = (1/N) sum_i f_i(x)`.
    pub fn global_eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let total: f64 = self.costs.iter().map(|c| c.eval_unchecked(x)).sum();
        Ok(total / self.n_agents() as f64)
    }

    /// The average cost as a single quadratic: `F` itself.
    pub fn aggregate(&self) -> QuadraticCost {
        let n = self.n_agents() as f64;
        let mut q = Array2::zeros(self.costs[0].q.dim());
        let mut b = Array1::zeros(self.dim());
        let mut c = 0.0;
        for cost in &self.costs {
            q += &cost.q;
            b += &cost.b;
            c += cost.c;
        }
        QuadraticCost {
            q: q / n,
            b: b / n,
            c: c / n,
        }
    }

    /// Stacked gradient `G(x)`: row `i` is `grad f_i(x_i)`.
    pub fn stacked_grad(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.n_agents(), x.nrows())?;
        check_dim(self.dim(), x.ncols())?;
        let mut g = Array2::zeros(x.dim());
        for ((cost, xi), mut gi) in self.costs.iter().zip(x.rows()).zip(g.rows_mut()) {
            cost.grad_into(&xi.to_vec(), gi.as_slice_mut().unwrap())?;
        }
        Ok(g)
    }

    /// `max_i lambda_max(Q_i)`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.costs
            .iter()
            .map(QuadraticCost::lipschitz)
            .fold(0.0, f64::max)
    }
}

/// The four-agent planar example: `f_j(x) = ||x - c_j||^2` with
/// `c_j = (5/3 - 2j/3)(1, 1)` over the box `[-2, 2]^2`.
pub fn fig1_instance() -> (Objective, FeasibleSet) {
    let costs = (1..=4)
        .map(|j| {
            let s = 5.0 / 3.0 - 2.0 * j as f64 / 3.0;
            QuadraticCost::isotropic(&[s, s], 2.0).expect("valid cost")
        })
        .collect();
    let set = FeasibleSet::cube(2, 2.0).expect("valid box");
    (Objective::new(costs).expect("valid objective"), set)
}

/// The initial decision variables used with [`fig1_instance`].
pub fn fig1_initial_points() -> Array2<f64> {
    ndarray::array![[-1.8, 1.8], [-1.8, -1.8], [1.8, 1.8], [1.8, -1.8]]
}

/// Seeded random quadratics `f_i(x) = 0.5 (x - c_i)^T Q_i (x - c_i)` with
/// `Q_i = R_i^T D_i R_i`, `D_i` log-uniform in `[1, conditioning]`, `R_i` a
/// product of Givens rotations and `c_i` uniform in `[-1, 1]^dim`.
pub fn random_instance(
    n_agents: usize,
    dim: usize,
    seed: u64,
    conditioning: f64,
) -> Result<Objective> {
    if n_agents < 2 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "random instance needs n_agents >= 2 and dim >= 1, got {n_agents} and {dim}"
        )));
    }
    if !(conditioning >= 1.0 && conditioning.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "conditioning must be >= 1, got {conditioning}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_cond = conditioning.ln();
    let costs = (0..n_agents)
        .map(|_| {
            let mut q = Array2::zeros((dim, dim));
            for k in 0..dim {
                q[[k, k]] = (rng.random::<f64>() * log_cond).exp().min(conditioning);
            }
            let rotations = (0..dim.saturating_sub(1))
                .map(|k| (k, k + 1))
                .chain((0..if dim > 1 { dim } else { 0 }).map(|_| {
                    let i = rng.random_range(0..dim);
                    let j = (i + rng.random_range(1..dim)) % dim;
                    (i, j)
                }))
                .collect::<Vec<_>>();
            for (i, j) in rotations {
                let angle = rng.random::<f64>() * std::f64::consts::TAU;
                rotate(&mut q, i, j, angle.cos(), angle.sin());
            }
            let sym = (&q + &q.t()) * 0.5;
            let center = Array1::from_iter((0..dim).map(|_| rng.random_range(-1.0..=1.0)));
            let b = -sym.dot(&center);
            let c = 0.5 * center.dot(&sym.dot(&center));
            QuadraticCost { q: sym, b, c }
        })
        .collect();
    Objective::new(costs)
}

/// `M <- G^T M G` for the Givens rotation acting on coordinates `i`, `j`.
fn rotate(m: &mut Array2<f64>, i: usize, j: usize, cos: f64, sin: f64) {
    let n = m.nrows();
    for k in 0..n {
        let (a, b) = (m[[k, i]], m[[k, j]]);
        m[[k, i]] = cos * a - sin * b;
        m[[k, j]] = sin * a + cos * b;
    }
    for k in 0..n {
        let (a, b) = (m[[i, k]], m[[j, k]]);
        m[[i, k]] = cos * a - sin * b;
        m[[j, k]] = sin * a + cos * b;
    }
}
