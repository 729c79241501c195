//! Compact convex feasible sets with a linear minimization oracle,
//! Euclidean projection and membership test.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{check_dim, Error, Result};

/// Weights at or below this are dropped from the polytope active set.
pub const POLYTOPE_TOL: f64 = 1e-10;
/// Relative optimality gap that ends the polytope projection.
const WOLFE_GAP_TOL: f64 = 1e-12;
/// Cap on inner active-set iterations of the polytope projection.
pub const POLYTOPE_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// `lower <= x <= upper` componentwise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `x >= 0, sum x = radius`.
    Simplex { dim: usize, radius: f64 },
    /// `sum |x| <= radius`.
    L1Ball { dim: usize, radius: f64 },
    /// Convex hull of the rows of `vertices`.
    Polytope(Polytope),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    vertices: Array2<f64>,
}

impl Polytope {
    pub fn vertices(&self) -> &Array2<f64> {
        &self.vertices
    }
}

impl FeasibleSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidSet(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(Error::InvalidSet("box has dimension zero".into()));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::InvalidSet(format!(
                    "box coordinate {k} has bounds [{l}, {u}]"
                )));
            }
        }
        Ok(Self::Box { lower, upper })
    }

    /// `{x : ||x||_inf <= radius}`.
    pub fn cube(dim: usize, radius: f64) -> Result<Self> {
        Self::new_box(vec![-radius; dim], vec![radius; dim])
    }

    pub fn simplex(dim: usize, radius: f64) -> Result<Self> {
        check_radius(dim, radius)?;
        Ok(Self::Simplex { dim, radius })
    }

    pub fn l1_ball(dim: usize, radius: f64) -> Result<Self> {
        check_radius(dim, radius)?;
        Ok(Self::L1Ball { dim, radius })
    }

    /// Convex hull of the given points, one per row.
    pub fn polytope(vertices: Array2<f64>) -> Result<Self> {
        let (m, n) = vertices.dim();
        if m == 0 || n == 0 {
            return Err(Error::InvalidSet(
                "polytope needs at least one vertex of positive dimension".into(),
            ));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSet("polytope vertex is not finite".into()));
        }
        Ok(Self::Polytope(Polytope { vertices }))
    }

    pub fn from_vertex_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut v = Array2::zeros((rows.len(), n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSet(format!(
                    "polytope vertex {i} has dimension {}, expected {n}",
                    row.len()
                )));
            }
            v.row_mut(i).assign(&ArrayView1::from(row.as_slice()));
        }
        Self::polytope(v)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lower, .. } => lower.len(),
            Self::Simplex { dim, .. } | Self::L1Ball { dim, .. } => *dim,
            Self::Polytope(p) => p.vertices.ncols(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Box { .. } => "box",
            Self::Simplex { .. } => "simplex",
            Self::L1Ball { .. } => "l1ball",
            Self::Polytope(_) => "polytope",
        }
    }

    /// Linear minimization oracle: a vertex of the set minimizing `<v, z>`.
    pub fn lmo(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.lmo_into(z, &mut out)?;
        Ok(out)
    }

    /// Ties go to the lower bound (box) or the smallest index.
    pub fn lmo_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), z.len())?;
        check_dim(self.dim(), out.len())?;
        match self {
            Self::Box { lower, upper } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = if z[k] < 0.0 { upper[k] } else { lower[k] };
                }
            }
            Self::Simplex { radius, .. } => {
                let k = first_extreme(z.iter().copied(), |a, b| a < b);
                out.fill(0.0);
                out[k] = *radius;
            }
            Self::L1Ball { radius, .. } => {
                let k = first_extreme(z.iter().map(|v| v.abs()), |a, b| a > b);
                out.fill(0.0);
                out[k] = if z[k] < 0.0 { *radius } else { -radius };
            }
            Self::Polytope(p) => {
                let scores = p.vertices.rows().into_iter().map(|v| dot(v.as_slice().unwrap(), z));
                let k = first_extreme(scores, |a, b| a < b);
                out.copy_from_slice(p.vertices.row(k).as_slice().unwrap());
            }
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        match self {
            Self::Box { lower, upper } => Ok(x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect()),
            Self::Simplex { radius, .. } => Ok(project_simplex(x, *radius)),
            Self::L1Ball { radius, .. } => Ok(project_l1_ball(x, *radius)),
            Self::Polytope(p) => p.project(x),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        let p = self.project(x)?;
        Ok(dist(x, &p) <= tol)
    }

    /// Seeded point of the set: a convex combination of vertices with
    /// normalized exponential weights.
    pub fn sample_point(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut exp = || -> f64 { Exp1.sample(&mut rng) };
        match self {
            Self::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| {
                    let (a, b) = (exp(), exp());
                    let w = b / (a + b);
                    (l + w * (u - l)).clamp(l, u)
                })
                .collect(),
            Self::Simplex { dim, radius } => {
                let w = normalized(*dim, &mut exp);
                w.into_iter().map(|wk| radius * wk).collect()
            }
            Self::L1Ball { dim, radius } => {
                // Vertices are +r e_k (first dim weights) and -r e_k.
                let w = normalized(2 * dim, &mut exp);
                (0..*dim).map(|k| radius * (w[k] - w[dim + k])).collect()
            }
            Self::Polytope(p) => {
                let w = normalized(p.vertices.nrows(), &mut exp);
                p.vertices.t().dot(&Array1::from(w)).to_vec()
            }
        }
    }
}

fn check_radius(dim: usize, radius: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidSet("set has dimension zero".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidSet(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Ok(())
}

fn normalized(len: usize, exp: &mut impl FnMut() -> f64) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Index of the first element that no later element beats under `better`.
fn first_extreme(values: impl Iterator<Item = f64>, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = (0, f64::NAN);
    for (k, v) in values.enumerate() {
        if k == 0 || better(v, best.1) {
            best = (k, v);
        }
    }
    best.0
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Projection onto `{x >= 0, sum x = radius}` by thresholding the sorted
/// coordinates.
pub fn project_simplex(x: &[f64], radius: f64) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

pub fn project_l1_ball(x: &[f64], radius: f64) -> Vec<f64> {
    let norm: f64 = x.iter().map(|v| v.abs()).sum();
    if norm <= radius {
        return x.to_vec();
    }
    let mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    project_simplex(&mags, radius)
        .into_iter()
        .zip(x)
        .map(|(m, v)| m.copysign(*v))
        .collect()
}

impl Polytope {
    /// Wolfe's minimum-norm-point method on the translated vertices
    /// `v_k - x`. The active set stays affinely independent, so each
    /// corral solve is a small nonsingular bordered system.
    fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let target = ArrayView1::from(x);
        let pts = &self.vertices - &target;
        let norms: Vec<f64> = pts.rows().into_iter().map(|r| r.dot(&r)).collect();
        let scale = norms.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(*v));
        let mut active = vec![first_extreme(norms.iter().copied(), |a, b| a < b)];
        let mut lambda = vec![1.0];
        let mut w = pts.row(active[0]).to_owned();
        let mut iters = 0;
        loop {
            let scores = pts.dot(&w);
            let j = first_extreme(scores.iter().copied(), |a, b| a < b);
            let gap = w.dot(&w) - scores[j];
            if gap <= WOLFE_GAP_TOL * scale || active.contains(&j) {
                break;
            }
            active.push(j);
            lambda.push(0.0);
            loop {
                iters += 1;
                if iters > POLYTOPE_MAX_ITERS {
                    return Err(Error::ProjectionNotConverged { iters, residual: gap });
                }
                let mu = affine_min_norm(&pts, &active).ok_or(Error::ProjectionNotConverged {
                    iters,
                    residual: gap,
                })?;
                if mu.iter().all(|&c| c > POLYTOPE_TOL) {
                    lambda = mu;
                    break;
                }
                // Move toward the affine minimizer until a weight hits zero.
                let (mut theta, mut hit) = (f64::INFINITY, 0);
                for (k, (&l, &m)) in lambda.iter().zip(&mu).enumerate() {
                    let ratio = if l > m { (l / (l - m)).min(1.0) } else { 1.0 };
                    if m <= POLYTOPE_TOL && ratio < theta {
                        theta = ratio;
                        hit = k;
                    }
                }
                for (l, m) in lambda.iter_mut().zip(&mu) {
                    *l += theta * (m - *l);
                }
                lambda[hit] = 0.0;
                let keep: Vec<bool> = lambda.iter().map(|&l| l > POLYTOPE_TOL).collect();
                let mut k = 0;
                active.retain(|_| (keep[k], k += 1).0);
                lambda.retain(|&l| l > POLYTOPE_TOL);
                let total: f64 = lambda.iter().sum();
                lambda.iter_mut().for_each(|l| *l /= total);
            }
            w = combine(&pts, &active, &lambda);
        }
        Ok(combine(&self.vertices, &active, &lambda).to_vec())
    }
}

fn combine(rows: &Array2<f64>, active: &[usize], weights: &[f64]) -> Array1<f64> {
    let mut out = Array1::zeros(rows.ncols());
    for (&k, &l) in active.iter().zip(weights) {
        out.scaled_add(l, &rows.row(k));
    }
    out
}

/// Weights of the minimum-norm point of the affine hull of the active rows.
fn affine_min_norm(pts: &Array2<f64>, active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut sys = DMatrix::zeros(k + 1, k + 1);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate().skip(a) {
            let g = pts.row(i).dot(&pts.row(j));
            sys[(a, b)] = g;
            sys[(b, a)] = g;
        }
        sys[(a, k)] = 1.0;
        sys[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = sys.lu().solve(&rhs)?;
    Some(sol.iter().take(k).copied().collect())
}
