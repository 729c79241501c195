//! Comparison algorithms: the discrete-time version of the projection-free
//! dynamics, decentralized Frank-Wolfe (DeFW), and a projected
//! gradient-tracking dynamics that solves a projection per agent per step.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Zip};

use crate::dynamics::{InitialState, Schedule, INIT_FEAS_TOL};
use crate::error::{check_dim, Error, Result};
use crate::graph::Digraph;
use crate::metrics::{MetricContext, Reference, RunRecord, SubproblemKind, SubproblemTally};
use crate::objective::Objective;
use crate::set::FeasibleSet;

const DOUBLY_STOCHASTIC_TOL: f64 = 1e-12;

/// Parameters of the two discrete-time Frank-Wolfe baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteConfig {
    /// Mixing step `delta` in `(0, 1)`.
    pub delta: f64,
    /// `beta^k` is this schedule evaluated at `t = k`.
    pub schedule: Schedule,
    pub n_iters: usize,
    pub record_every: usize,
}

impl Default for DiscreteConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            schedule: Schedule::InverseLinear { t0: 1.0 },
            n_iters: 1000,
            record_every: 10,
        }
    }
}

impl DiscreteConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be positive".into()));
        }
        self.schedule.validate()
    }

    /// `eta^k = delta * beta^k`.
    pub fn eta(&self, k: usize) -> f64 {
        self.delta * self.schedule.beta(k as f64)
    }
}

fn check_mixing(mixing: &Digraph) -> Result<()> {
    if mixing.is_doubly_stochastic(DOUBLY_STOCHASTIC_TOL) {
        Ok(())
    } else {
        Err(Error::NotDoublyStochastic(
            "row and column sums of the adjacency must equal one".into(),
        ))
    }
}

fn check_shape(x: ArrayView2<'_, f64>, mixing: &Digraph, obj: &Objective) -> Result<()> {
    check_dim(mixing.n_agents(), x.nrows())?;
    check_dim(obj.n_agents(), x.nrows())?;
    check_dim(obj.dim(), x.ncols())
}

/// `Avg_i{m} = (1 - delta) m_i + delta sum_j a_ij m_j` for every row.
pub fn neighbor_average(m: ArrayView2<'_, f64>, mixing: &Digraph, delta: f64) -> Array2<f64> {
    let a = mixing.adjacency();
    let mut out = &m * (1.0 - delta);
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        for (j, mj) in m.rows().into_iter().enumerate() {
            let w = a[[i, j]];
            if w != 0.0 {
                row.scaled_add(delta * w, &mj);
            }
        }
    }
    out
}

fn lmo_rows(
    set: &FeasibleSet,
    z: ArrayView2<'_, f64>,
    tally: &mut Option<&mut SubproblemTally>,
) -> Result<Array2<f64>> {
    let mut v = Array2::zeros(z.dim());
    for (zi, mut vi) in z.rows().into_iter().zip(v.rows_mut()) {
        let started = Instant::now();
        set.lmo_into(&zi.to_vec(), vi.as_slice_mut().unwrap())?;
        if let Some(t) = tally.as_deref_mut() {
            t.record(started);
        }
    }
    Ok(v)
}

/// One iteration of the discretized projection-free dynamics:
///
/// ```text
/// x_i+ = Avg_i{x} + eta^k (v_i - x_i)
/// z_i+ = Avg_i{z} + grad f_i(x_i+) - grad f_i(x_i)
/// v_i  = lmo(z_i)
/// ```
pub fn discretized_cg_step(
    x: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
    mixing: &Digraph,
    obj: &Objective,
    set: &FeasibleSet,
    k: usize,
    cfg: &DiscreteConfig,
) -> Result<(Array2<f64>, Array2<f64>)> {
    cfg.validate()?;
    check_mixing(mixing)?;
    check_shape(x, mixing, obj)?;
    check_dim(x.nrows(), z.nrows())?;
    check_dim(x.ncols(), z.ncols())?;
    let g = obj.stacked_grad(x)?;
    discretized_cg_inner(x, z, g.view(), mixing, obj, set, k, cfg, &mut None)
}

#[allow(clippy::too_many_arguments)]
fn discretized_cg_inner(
    x: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
    g: ArrayView2<'_, f64>,
    mixing: &Digraph,
    obj: &Objective,
    set: &FeasibleSet,
    k: usize,
    cfg: &DiscreteConfig,
    tally: &mut Option<&mut SubproblemTally>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let eta = cfg.eta(k);
    // The x-update is a convex combination only while delta + eta <= 1.
    if cfg.delta + eta > 1.0 {
        return Err(Error::StepBound {
            h: eta,
            bound: 1.0 - cfg.delta,
        });
    }
    let v = lmo_rows(set, z, tally)?;
    let mut x_next = neighbor_average(x, mixing, cfg.delta);
    Zip::from(&mut x_next)
        .and(&v)
        .and(&x)
        .for_each(|o, &vi, &xi| *o += eta * (vi - xi));
    let g_next = obj.stacked_grad(x_next.view())?;
    let mut z_next = neighbor_average(z, mixing, cfg.delta);
    Zip::from(&mut z_next)
        .and(&g_next)
        .and(&g)
        .for_each(|o, &gn, &go| *o += gn - go);
    Ok((x_next, z_next))
}

/// One DeFW iteration:
///
/// ```text
/// xhat = Avg{x}
/// z_i  = Avg_i{ grad f_j(xhat_j) }
/// x_i+ = xhat_i + eta^k (lmo(z_i) - xhat_i)
/// ```
pub fn defw_step(
    x: ArrayView2<'_, f64>,
    mixing: &Digraph,
    obj: &Objective,
    set: &FeasibleSet,
    k: usize,
    cfg: &DiscreteConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    check_mixing(mixing)?;
    check_shape(x, mixing, obj)?;
    Ok(defw_inner(x, mixing, obj, set, k, cfg, &mut None)?.x)
}

struct DefwIterate {
    x: Array2<f64>,
    /// Gradient estimate used for the LMO.
    z: Array2<f64>,
}

fn defw_inner(
    x: ArrayView2<'_, f64>,
    mixing: &Digraph,
    obj: &Objective,
    set: &FeasibleSet,
    k: usize,
    cfg: &DiscreteConfig,
    tally: &mut Option<&mut SubproblemTally>,
) -> Result<DefwIterate> {
    let eta = cfg.eta(k);
    let xhat = neighbor_average(x, mixing, cfg.delta);
    let g = obj.stacked_grad(xhat.view())?;
    let z = neighbor_average(g.view(), mixing, cfg.delta);
    let v = lmo_rows(set, z.view(), tally)?;
    let mut x_next = xhat.clone();
    Zip::from(&mut x_next)
        .and(&v)
        .and(&xhat)
        .for_each(|o, &vi, &xh| *o += eta * (vi - xh));
    Ok(DefwIterate { x: x_next, z })
}

/// One explicit Euler step of the projected gradient-tracking dynamics
///
/// ```text
/// x' = P(x - alpha (L x + z)) - x
/// y' = -L z,   z = y + G(x)
/// ```
pub fn projected_dynamics_step(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    graph: &Digraph,
    obj: &Objective,
    set: &FeasibleSet,
    h: f64,
    alpha: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    ProjectedConfig {
        step: h,
        alpha,
        horizon: h,
        record_every: h,
    }
    .validate()?;
    check_shape(x, graph, obj)?;
    check_dim(x.nrows(), y.nrows())?;
    check_dim(x.ncols(), y.ncols())?;
    let g = obj.stacked_grad(x)?;
    projected_inner(x, y, g.view(), graph, set, h, alpha, &mut None)
}

#[allow(clippy::too_many_arguments)]
fn projected_inner(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    g: ArrayView2<'_, f64>,
    graph: &Digraph,
    set: &FeasibleSet,
    h: f64,
    alpha: f64,
    tally: &mut Option<&mut SubproblemTally>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let a = graph.adjacency();
    let z = &y + &g;
    let mut x_next = x.to_owned();
    let mut y_next = y.to_owned();
    for i in 0..x.nrows() {
        // Row i of L x + z, and of -L z.
        let mut drive = z.row(i).to_owned();
        let mut dy = ndarray::Array1::zeros(x.ncols());
        for j in 0..x.nrows() {
            let w = a[[i, j]];
            if w != 0.0 {
                Zip::from(&mut drive)
                    .and(&x.row(i))
                    .and(&x.row(j))
                    .for_each(|d, &xi, &xj| *d += w * (xi - xj));
                Zip::from(&mut dy)
                    .and(&z.row(j))
                    .and(&z.row(i))
                    .for_each(|d, &zj, &zi| *d += w * (zj - zi));
            }
        }
        let trial: Vec<f64> = x
            .row(i)
            .iter()
            .zip(&drive)
            .map(|(xi, d)| xi - alpha * d)
            .collect();
        let started = Instant::now();
        let p = set.project(&trial)?;
        if let Some(t) = tally.as_deref_mut() {
            t.record(started);
        }
        Zip::from(x_next.row_mut(i))
            .and(&ndarray::ArrayView1::from(&p))
            .for_each(|o, &pk| *o += h * (pk - *o));
        y_next.row_mut(i).scaled_add(h, &dy);
    }
    Ok((x_next, y_next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedConfig {
    /// Euler step, at most one so each update stays a convex combination.
    pub step: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub record_every: f64,
}

impl ProjectedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "projected step must lie in (0, 1], got {}",
                self.step
            )));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("horizon", self.horizon),
            ("record_every", self.record_every),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "projected {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Shared setup for the baseline runners.
struct Setup<'a> {
    obj: &'a Objective,
    set: &'a FeasibleSet,
    ctx: MetricContext<'a>,
    x0: Array2<f64>,
}

fn setup<'a>(
    graph: &Digraph,
    obj: &'a Objective,
    set: &'a FeasibleSet,
    init: &InitialState,
    reference: &Reference,
) -> Result<Setup<'a>> {
    check_dim(graph.n_agents(), obj.n_agents())?;
    check_dim(obj.dim(), set.dim())?;
    let x0 = init.resolve(graph.n_agents(), set)?;
    for (agent, row) in x0.rows().into_iter().enumerate() {
        if !set.contains(&row.to_vec(), INIT_FEAS_TOL)? {
            return Err(Error::InfeasibleInitialState { agent });
        }
    }
    Ok(Setup {
        obj,
        set,
        ctx: MetricContext::new(obj, set, reference.value),
        x0,
    })
}

fn check_finite(m: &Array2<f64>, t: f64) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t })
    }
}

/// Runs the discretized projection-free iteration with `z^0 = G(x^0)`.
pub fn run_discretized_cg(
    mixing: &Digraph,
    obj: &Objective,
    set: &FeasibleSet,
    cfg: &DiscreteConfig,
    init: &InitialState,
    reference: &Reference,
) -> Result<RunRecord> {
    cfg.validate()?;
    check_mixing(mixing)?;
    let s = setup(mixing, obj, set, init, reference)?;
    let mut rec = RunRecord {
        algorithm: "cg_discrete".into(),
        ..RunRecord::default()
    };
    let mut tally = SubproblemTally::new(SubproblemKind::Lmo);
    let started = Instant::now();
    let mut x = s.x0;
    let mut g = s.obj.stacked_grad(x.view())?;
    let mut z = g.clone();
    for k in 0..=cfg.n_iters {
        if k % cfg.record_every == 0 || k == cfg.n_iters {
            let y = &z - &g;
            s.ctx.record(
                &mut rec,
                k as f64,
                k as u64,
                started.elapsed().as_secs_f64(),
                x.view(),
                z.view(),
                g.view(),
                Some(y.view()),
            )?;
        }
        if k == cfg.n_iters {
            break;
        }
        let (xn, zn) = discretized_cg_inner(
            x.view(),
            z.view(),
            g.view(),
            mixing,
            s.obj,
            s.set,
            k,
            cfg,
            &mut Some(&mut tally),
        )?;
        check_finite(&xn, (k + 1) as f64)?;
        check_finite(&zn, (k + 1) as f64)?;
        g = s.obj.stacked_grad(xn.view())?;
        x = xn;
        z = zn;
    }
    rec.subproblem_timings.push(tally);
    rec.final_x = Some(x);
    Ok(rec)
}

pub fn run_defw(
    mixing: &Digraph,
    obj: &Objective,
    set: &FeasibleSet,
    cfg: &DiscreteConfig,
    init: &InitialState,
    reference: &Reference,
) -> Result<RunRecord> {
    cfg.validate()?;
    check_mixing(mixing)?;
    let s = setup(mixing, obj, set, init, reference)?;
    let mut rec = RunRecord {
        algorithm: "defw".into(),
        ..RunRecord::default()
    };
    let mut tally = SubproblemTally::new(SubproblemKind::Lmo);
    let started = Instant::now();
    let mut x = s.x0;
    // Gradient estimate that produced the current iterate; G(x^0) at start.
    let mut z = s.obj.stacked_grad(x.view())?;
    for k in 0..=cfg.n_iters {
        if k % cfg.record_every == 0 || k == cfg.n_iters {
            let g = s.obj.stacked_grad(x.view())?;
            s.ctx.record(
                &mut rec,
                k as f64,
                k as u64,
                started.elapsed().as_secs_f64(),
                x.view(),
                z.view(),
                g.view(),
                None,
            )?;
        }
        if k == cfg.n_iters {
            break;
        }
        let it = defw_inner(x.view(), mixing, s.obj, s.set, k, cfg, &mut Some(&mut tally))?;
        check_finite(&it.x, (k + 1) as f64)?;
        x = it.x;
        z = it.z;
    }
    rec.subproblem_timings.push(tally);
    rec.final_x = Some(x);
    Ok(rec)
}

/// Runs the projected gradient-tracking dynamics with `y(0) = 0`.
pub fn run_projected(
    graph: &Digraph,
    obj: &Objective,
    set: &FeasibleSet,
    cfg: &ProjectedConfig,
    init: &InitialState,
    reference: &Reference,
) -> Result<RunRecord> {
    cfg.validate()?;
    graph.validate_assumptions()?;
    let s = setup(graph, obj, set, init, reference)?;
    let mut rec = RunRecord {
        algorithm: "projected".into(),
        ..RunRecord::default()
    };
    let mut tally = SubproblemTally::new(SubproblemKind::Projection);
    let started = Instant::now();
    let n_steps = (cfg.horizon / cfg.step).round() as usize;
    let stride = ((cfg.record_every / cfg.step).round() as usize).max(1);
    let mut x = s.x0;
    let mut y = Array2::zeros(x.dim());
    for k in 0..=n_steps {
        let g = s.obj.stacked_grad(x.view())?;
        if k % stride == 0 || k == n_steps {
            let z = &y + &g;
            s.ctx.record(
                &mut rec,
                k as f64 * cfg.step,
                k as u64,
                started.elapsed().as_secs_f64(),
                x.view(),
                z.view(),
                g.view(),
                Some(y.view()),
            )?;
        }
        if k == n_steps {
            break;
        }
        let (xn, yn) = projected_inner(
            x.view(),
            y.view(),
            g.view(),
            graph,
            s.set,
            cfg.step,
            cfg.alpha,
            &mut Some(&mut tally),
        )?;
        let t = (k + 1) as f64 * cfg.step;
        check_finite(&xn, t)?;
        check_finite(&yn, t)?;
        x = xn;
        y = yn;
    }
    rec.subproblem_timings.push(tally);
    rec.final_x = Some(x);
    Ok(rec)
}
