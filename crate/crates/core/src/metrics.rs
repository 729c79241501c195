//! Convergence diagnostics, the centralized reference solver, subproblem
//! timing and the scalar comparison-ODE check.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::objective::{Objective, QuadraticCost};
use crate::set::FeasibleSet;

/// Optimality gaps in `[-CLAMP_SLACK, 0)` are rounding noise and reported as zero.
pub const CLAMP_SLACK: f64 = 1e-9;
/// Optimality gaps below `-BROKEN_SLACK` mean the reference value is wrong.
pub const BROKEN_SLACK: f64 = 1e-6;
pub const REFERENCE_MAX_ITERS: usize = 10_000_000;
/// FW-gap tolerance used when a run computes its own reference value.
pub const RUN_REFERENCE_TOL: f64 = 1e-12;

/// `||x - 1 xbar^T||_F`.
pub fn consensus_error(x: ArrayView2<'_, f64>) -> f64 {
    let Some(mean) = x.mean_axis(Axis(0)) else {
        return 0.0;
    };
    x.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&mean)
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Stacked norm of `z_i - gbar` where `z = y + G(x)` and `gbar` is the
/// average local gradient.
pub fn tracking_error(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    obj: &Objective,
) -> Result<f64> {
    check_dim(x.nrows(), y.nrows())?;
    check_dim(x.ncols(), y.ncols())?;
    let g = obj.stacked_grad(x)?;
    let z = &y + &g;
    Ok(tracking_residual(z.view(), g.view()))
}

/// `sqrt(sum_i ||z_i - mean_j g_j||^2)`.
pub(crate) fn tracking_residual(z: ArrayView2<'_, f64>, g: ArrayView2<'_, f64>) -> f64 {
    let Some(gbar) = g.mean_axis(Axis(0)) else {
        return 0.0;
    };
    z.rows()
        .into_iter()
        .map(|zi| {
            zi.iter()
                .zip(&gbar)
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Row mean `xbar`.
pub fn mean_row(x: ArrayView2<'_, f64>) -> Vec<f64> {
    x.mean_axis(Axis(0))
        .map(|m| m.to_vec())
        .unwrap_or_default()
}

/// `F(xbar) - F*`.
pub fn optimality_gap(x: ArrayView2<'_, f64>, obj: &Objective, fstar: f64) -> Result<f64> {
    let xbar = mean_row(x);
    clamp_gap(obj.global_eval(&xbar)? - fstar)
}

fn clamp_gap(gap: f64) -> Result<f64> {
    if gap < -BROKEN_SLACK {
        Err(Error::BrokenReference { gap })
    } else if (-CLAMP_SLACK..0.0).contains(&gap) {
        Ok(0.0)
    } else {
        Ok(gap)
    }
}

/// Frank-Wolfe gap `grad F(xbar)^T (xbar - lmo(grad F(xbar)))`.
pub fn fw_gap(xbar: &[f64], obj: &Objective, set: &FeasibleSet) -> Result<f64> {
    fw_gap_of(&obj.aggregate(), xbar, set)
}

fn fw_gap_of(f: &QuadraticCost, x: &[f64], set: &FeasibleSet) -> Result<f64> {
    let g = f.grad(x)?;
    let v = set.lmo(&g)?;
    Ok(x.iter().zip(&v).zip(&g).map(|((a, b), gk)| gk * (a - b)).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x: Vec<f64>,
    pub value: f64,
    pub fw_gap: f64,
    pub iters: usize,
}

/// Centralized minimizer of `F` over the set, certified by the FW gap.
///
/// Iterates projected gradient steps of length `1/lambda_max(Q_avg)` and
/// stops once the FW gap at the iterate is at most `tol`.
pub fn reference_solution(obj: &Objective, set: &FeasibleSet, tol: f64) -> Result<Reference> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "reference tolerance must be positive, got {tol}"
        )));
    }
    check_dim(set.dim(), obj.dim())?;
    let f = obj.aggregate();
    let lip = f.lipschitz();
    let mut x = set.sample_point(0);
    for iters in 0..REFERENCE_MAX_ITERS {
        let g = f.grad(&x)?;
        let v = set.lmo(&g)?;
        let gap: f64 = x.iter().zip(&v).zip(&g).map(|((a, b), gk)| gk * (a - b)).sum();
        if gap <= tol {
            return Ok(Reference {
                value: f.eval(&x)?,
                x,
                fw_gap: gap,
                iters,
            });
        }
        if lip <= 0.0 {
            // Linear objective: the LMO vertex is optimal.
            x = v;
            continue;
        }
        let trial: Vec<f64> = x.iter().zip(&g).map(|(a, gk)| a - gk / lip).collect();
        let next = set.project(&trial)?;
        if next == x {
            let gap = fw_gap_of(&f, &x, set)?;
            return Err(Error::ReferenceNotConverged { iters, gap, tol });
        }
        x = next;
    }
    let gap = fw_gap_of(&f, &x, set)?;
    Err(Error::ReferenceNotConverged {
        iters: REFERENCE_MAX_ITERS,
        gap,
        tol,
    })
}

/// Classical Frank-Wolfe with step `2/(k+2)` for a fixed iteration count.
pub fn centralized_frank_wolfe(
    obj: &Objective,
    set: &FeasibleSet,
    x0: &[f64],
    iters: usize,
) -> Result<Vec<f64>> {
    let f = obj.aggregate();
    let mut x = x0.to_vec();
    for k in 0..iters {
        let g = f.grad(&x)?;
        let v = set.lmo(&g)?;
        let gamma = 2.0 / (k as f64 + 2.0);
        for (xk, vk) in x.iter_mut().zip(&v) {
            *xk += gamma * (vk - *xk);
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubproblemKind {
    Lmo,
    Projection,
}

impl SubproblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lmo => "lmo",
            Self::Projection => "projection",
        }
    }
}

impl fmt::Display for SubproblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Accumulated wall-clock time of subproblem solves during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemTally {
    pub kind: SubproblemKind,
    pub calls: u64,
    pub total_ns: u128,
}

impl SubproblemTally {
    pub fn new(kind: SubproblemKind) -> Self {
        Self {
            kind,
            calls: 0,
            total_ns: 0,
        }
    }

    pub fn record(&mut self, started: Instant) {
        self.calls += 1;
        self.total_ns += started.elapsed().as_nanos();
    }

    pub fn mean_ns(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            self.total_ns as f64 / self.calls as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemTiming {
    pub mean_ns: f64,
    pub median_ns: f64,
}

pub const MIN_TIMING_REPEATS: usize = 10;

/// Mean and median wall time of one subproblem solve. The first tenth of
/// the repeats is discarded as warm-up.
pub fn time_subproblem(
    kind: SubproblemKind,
    set: &FeasibleSet,
    probe: &[f64],
    repeats: usize,
) -> Result<SubproblemTiming> {
    if repeats < MIN_TIMING_REPEATS {
        return Err(Error::InvalidParameter(format!(
            "timing needs at least {MIN_TIMING_REPEATS} repeats, got {repeats}"
        )));
    }
    check_dim(set.dim(), probe.len())?;
    let warmup = repeats / 10;
    let mut samples = Vec::with_capacity(repeats - warmup);
    for r in 0..repeats {
        let started = Instant::now();
        let out = match kind {
            SubproblemKind::Lmo => set.lmo(std::hint::black_box(probe))?,
            SubproblemKind::Projection => set.project(std::hint::black_box(probe))?,
        };
        let elapsed = started.elapsed().as_nanos() as f64;
        std::hint::black_box(out);
        if r >= warmup {
            // Clock resolution can report zero for the cheapest oracles.
            samples.push(elapsed.max(1.0));
        }
    }
    let mean_ns = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    let median_ns = if samples.len() % 2 == 0 {
        0.5 * (samples[mid - 1] + samples[mid])
    } else {
        samples[mid]
    };
    Ok(SubproblemTiming { mean_ns, median_ns })
}

/// Scalar functions of time for the comparison-ODE check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFn {
    Constant(f64),
    /// `1 / (1 + t)`
    InverseLinear,
    /// `exp(-t)`
    ExpDecay,
}

impl ScalarFn {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Self::Constant(c) => c,
            Self::InverseLinear => 1.0 / (1.0 + t),
            Self::ExpDecay => (-t).exp(),
        }
    }
}

impl FromStr for ScalarFn {
    type Err = Error;

    /// `"inverse_linear"`, `"exp"` or `"constant:<value>"`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse_linear" => Ok(Self::InverseLinear),
            "exp" => Ok(Self::ExpDecay),
            _ => s
                .strip_prefix("constant:")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .map(Self::Constant)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!("unknown scalar function {s:?}"))
                }),
        }
    }
}

pub const LEMMA2_STEP: f64 = 1e-3;

/// Integrates `s' = -gamma(t) s + gamma(t) eps(t)` by explicit Euler with
/// step [`LEMMA2_STEP`] and returns `s(horizon)`.
pub fn lemma2_numeric_check(gamma: ScalarFn, eps: ScalarFn, s0: f64, horizon: f64) -> Result<f64> {
    if let ScalarFn::Constant(c) = gamma {
        if c <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got constant {c}"
            )));
        }
    }
    if let ScalarFn::Constant(c) = eps {
        if c != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eps must vanish at infinity, got constant {c}"
            )));
        }
    }
    if !(horizon >= 0.0 && horizon.is_finite()) || s0 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need s0 >= 0 and a finite horizon, got s0 = {s0}, T = {horizon}"
        )));
    }
    let steps = (horizon / LEMMA2_STEP).round() as usize;
    let mut s = s0;
    for k in 0..steps {
        let t = k as f64 * LEMMA2_STEP;
        let g = gamma.eval(t);
        s += LEMMA2_STEP * g * (eps.eval(t) - s);
    }
    Ok(s)
}

/// Time series produced by one run of any algorithm.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub algorithm: String,
    /// Simulation time for continuous-time dynamics, iteration index for
    /// discrete-time algorithms.
    pub times: Vec<f64>,
    pub consensus_err: Vec<f64>,
    pub tracking_err: Vec<f64>,
    pub optimality_gap: Vec<f64>,
    pub fw_gap: Vec<f64>,
    /// Iteration count at each sample.
    pub iterations: Vec<u64>,
    /// Seconds since the run started, at each sample.
    pub wall_s: Vec<f64>,
    /// `||sum_i y_i||` at each sample; empty for algorithms without `y`.
    pub y_sum_norm: Vec<f64>,
    /// `||sum_i z_i - sum_i grad f_i(x_i)||`; empty when not applicable.
    pub z_sum_residual: Vec<f64>,
    /// Largest distance of any agent's `x_i` from the feasible set.
    pub max_infeasibility: Vec<f64>,
    pub subproblem_timings: Vec<SubproblemTally>,
    pub final_x: Option<Array2<f64>>,
    pub config_echo: Option<String>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the last sample taken at or before `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.times.iter().rposition(|&s| s <= t)
    }
}

/// Evaluates the per-sample metrics for one problem instance.
#[derive(Debug, Clone)]
pub struct MetricContext<'a> {
    obj: &'a Objective,
    set: &'a FeasibleSet,
    average: QuadraticCost,
    fstar: f64,
}

impl<'a> MetricContext<'a> {
    pub fn new(obj: &'a Objective, set: &'a FeasibleSet, fstar: f64) -> Self {
        Self {
            obj,
            set,
            average: obj.aggregate(),
            fstar,
        }
    }

    /// Appends one sample. `g` is the stacked gradient at `x`; `y` is the
    /// tracking auxiliary when the algorithm has one.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn record(
        &self,
        rec: &mut RunRecord,
        time: f64,
        iteration: u64,
        wall_s: f64,
        x: ArrayView2<'_, f64>,
        z: ArrayView2<'_, f64>,
        g: ArrayView2<'_, f64>,
        y: Option<ArrayView2<'_, f64>>,
    ) -> Result<()> {
        let xbar = mean_row(x);
        let gap = clamp_gap(self.average.eval(&xbar)? - self.fstar)?;
        rec.times.push(time);
        rec.iterations.push(iteration);
        rec.wall_s.push(wall_s);
        rec.consensus_err.push(consensus_error(x));
        rec.tracking_err.push(tracking_residual(z, g));
        rec.optimality_gap.push(gap);
        rec.fw_gap.push(fw_gap_of(&self.average, &xbar, self.set)?);
        let mut worst: f64 = 0.0;
        for xi in x.rows() {
            let xi = xi.to_vec();
            let p = self.set.project(&xi)?;
            worst = worst.max(crate::set::dist(&xi, &p));
        }
        rec.max_infeasibility.push(worst);
        if let Some(y) = y {
            let ysum = y.sum_axis(Axis(0));
            rec.y_sum_norm.push(ysum.dot(&ysum).sqrt());
            let resid: Array1<f64> = z.sum_axis(Axis(0)) - g.sum_axis(Axis(0));
            rec.z_sum_residual.push(resid.dot(&resid).sqrt());
        }
        Ok(())
    }

    pub fn objective(&self) -> &Objective {
        self.obj
    }

    pub fn fstar(&self) -> f64 {
        self.fstar
    }
}
