//! Continuous-time distributed projection-free dynamics
//!
//! ```text
//! x_i' = sum_j a_ij (x_j - x_i) + beta(t) (v_i - x_i)
//! y_i' = sum_j a_ij (z_j - z_i)
//! z_i  = y_i + grad f_i(x_i)
//! v_i  = argmin_{v in Omega} <z_i, v>
//! ```
//!
//! State is `(x, y)`; `z` and `v` are recomputed from it at every
//! evaluation of the vector field.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::graph::Digraph;
use crate::metrics::{
    reference_solution, MetricContext, Reference, RunRecord, SubproblemKind, SubproblemTally,
    RUN_REFERENCE_TOL,
};
use crate::objective::Objective;
use crate::set::FeasibleSet;

/// Tolerance for accepting user-supplied initial points as feasible.
pub const INIT_FEAS_TOL: f64 = 1e-9;

/// Positive, nonincreasing step-weight `beta(t)` with `beta -> 0` and a
/// divergent integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `t0 / (t0 + t)`
    InverseLinear { t0: f64 },
    /// `(t0 / (t0 + t))^p`, `0 < p <= 1`
    InversePower { t0: f64, p: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Self::InverseLinear { t0: 1.0 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let (t0, p) = match *self {
            Self::InverseLinear { t0 } => (t0, 1.0),
            Self::InversePower { t0, p } => (t0, p),
        };
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "schedule t0 must be positive, got {t0}"
            )));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule exponent must lie in (0, 1], got {p}"
            )));
        }
        Ok(())
    }

    pub fn beta(&self, t: f64) -> f64 {
        match *self {
            Self::InverseLinear { t0 } => t0 / (t0 + t),
            Self::InversePower { t0, p } => (t0 / (t0 + t)).powf(p),
        }
    }

    /// Closed form of `int_0^t beta`.
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            Self::InverseLinear { t0 } | Self::InversePower { t0, p: 1.0 } => t0 * (t / t0).ln_1p(),
            Self::InversePower { t0, p } => {
                t0.powf(p) * ((t0 + t).powf(1.0 - p) - t0.powf(1.0 - p)) / (1.0 - p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub step: f64,
    pub horizon: f64,
    pub record_every: f64,
    /// Enforce the Euler step bound that keeps every `x_i` exactly feasible.
    pub exact_feasibility: bool,
}

impl IntegratorConfig {
    pub fn euler(step: f64, horizon: f64, record_every: f64) -> Self {
        Self {
            method: Method::Euler,
            step,
            horizon,
            record_every,
            exact_feasibility: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("step", self.step),
            ("horizon", self.horizon),
            ("record_every", self.record_every),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "integrator {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn n_steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    fn record_stride(&self) -> usize {
        ((self.record_every / self.step).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// Row `i` is agent `i`'s decision variable.
    pub x: Array2<f64>,
    /// Row `i` is agent `i`'s gradient-tracking auxiliary.
    pub y: Array2<f64>,
    pub t: f64,
}

impl NetworkState {
    /// `y(0) = 0`.
    pub fn new(x: Array2<f64>) -> Self {
        let y = Array2::zeros(x.dim());
        Self { x, y, t: 0.0 }
    }
}

/// How to pick `x_i(0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Explicit(Array2<f64>),
    /// Per-agent seeded samples of the feasible set.
    Seeded(u64),
}

impl InitialState {
    pub fn resolve(&self, n_agents: usize, set: &FeasibleSet) -> Result<Array2<f64>> {
        match self {
            Self::Explicit(x) => {
                check_dim(n_agents, x.nrows())?;
                check_dim(set.dim(), x.ncols())?;
                Ok(x.clone())
            }
            Self::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut x = Array2::zeros((n_agents, set.dim()));
                for mut row in x.rows_mut() {
                    let p = set.sample_point(rng.random());
                    row.assign(&ndarray::ArrayView1::from(&p));
                }
                Ok(x)
            }
        }
    }
}

/// Derivative of the state, row-aligned with `x` and `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Array2<f64>,
    pub dy: Array2<f64>,
}

/// Quantities derived from a state at one evaluation of the vector field.
struct Eval {
    z: Array2<f64>,
    v: Array2<f64>,
}

/// One problem instance: graph, costs, feasible set and `beta` schedule.
#[derive(Debug, Clone)]
pub struct Network<'a> {
    pub graph: &'a Digraph,
    pub objective: &'a Objective,
    pub set: &'a FeasibleSet,
    pub schedule: Schedule,
}

impl<'a> Network<'a> {
    pub fn new(
        graph: &'a Digraph,
        objective: &'a Objective,
        set: &'a FeasibleSet,
        schedule: Schedule,
    ) -> Result<Self> {
        schedule.validate()?;
        check_dim(graph.n_agents(), objective.n_agents())?;
        check_dim(objective.dim(), set.dim())?;
        Ok(Self {
            graph,
            objective,
            set,
            schedule,
        })
    }

    fn check_state(&self, state: &NetworkState) -> Result<()> {
        check_dim(self.graph.n_agents(), state.x.nrows())?;
        check_dim(self.set.dim(), state.x.ncols())?;
        check_dim(state.x.nrows(), state.y.nrows())?;
        check_dim(state.x.ncols(), state.y.ncols())
    }

    fn evaluate(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        tally: &mut Option<&mut SubproblemTally>,
    ) -> Result<Eval> {
        let g = self.objective.stacked_grad(x)?;
        let z = &y + &g;
        let mut v = Array2::zeros(x.dim());
        for (zi, mut vi) in z.rows().into_iter().zip(v.rows_mut()) {
            let started = Instant::now();
            self.set
                .lmo_into(zi.as_slice().unwrap(), vi.as_slice_mut().unwrap())?;
            if let Some(t) = tally.as_deref_mut() {
                t.record(started);
            }
        }
        Ok(Eval { z, v })
    }

    /// `sum_j a_ij (m_j - m_i)` for every row `i`.
    fn laplacian_flow(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        let a = self.graph.adjacency();
        let mut out = Array2::zeros(m.dim());
        for (i, mut oi) in out.rows_mut().into_iter().enumerate() {
            let mi = m.row(i);
            for (j, mj) in m.rows().into_iter().enumerate() {
                let w = a[[i, j]];
                if w != 0.0 {
                    Zip::from(&mut oi)
                        .and(&mj)
                        .and(&mi)
                        .for_each(|o, &xj, &xi| *o += w * (xj - xi));
                }
            }
        }
        out
    }

    fn derivative_at(
        &self,
        x: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        t: f64,
        tally: &mut Option<&mut SubproblemTally>,
    ) -> Result<(Derivative, Eval)> {
        let e = self.evaluate(x, y, tally)?;
        let beta = self.schedule.beta(t);
        let mut dx = self.laplacian_flow(x);
        Zip::from(&mut dx)
            .and(&e.v)
            .and(&x)
            .for_each(|d, &vi, &xi| *d += beta * (vi - xi));
        let dy = self.laplacian_flow(e.z.view());
        Ok((Derivative { dx, dy }, e))
    }

    /// Right-hand side of the dynamics at `state`.
    pub fn rhs(&self, state: &NetworkState) -> Result<Derivative> {
        self.check_state(state)?;
        Ok(self
            .derivative_at(state.x.view(), state.y.view(), state.t, &mut None)?
            .0)
    }

    /// `1 / (d_max + beta(0))`: the largest Euler step for which the
    /// `x`-update is a convex combination of `x_i`, its neighbours and `v_i`.
    pub fn euler_step_bound(&self) -> f64 {
        1.0 / (self.graph.max_degree() + self.schedule.beta(0.0))
    }

    pub fn step(&self, state: &NetworkState, cfg: &IntegratorConfig) -> Result<NetworkState> {
        cfg.validate()?;
        self.check_state(state)?;
        self.check_step_bound(cfg)?;
        self.advance(state, cfg.method, cfg.step, &mut None)
    }

    fn check_step_bound(&self, cfg: &IntegratorConfig) -> Result<()> {
        if cfg.method == Method::Euler && cfg.exact_feasibility {
            let bound = self.euler_step_bound();
            if cfg.step > bound {
                return Err(Error::StepBound { h: cfg.step, bound });
            }
        }
        Ok(())
    }

    fn advance(
        &self,
        state: &NetworkState,
        method: Method,
        h: f64,
        tally: &mut Option<&mut SubproblemTally>,
    ) -> Result<NetworkState> {
        let (x, y, t) = (state.x.view(), state.y.view(), state.t);
        match method {
            Method::Euler => {
                let e = self.evaluate(x, y, tally)?;
                let beta = self.schedule.beta(t);
                let a = self.graph.adjacency();
                let degrees = self.graph.degrees();
                // x_i+ = (1 - h(d_i + beta)) x_i + h sum_j a_ij x_j + h beta v_i
                let mut x_next = Array2::zeros(x.dim());
                for (i, mut row) in x_next.rows_mut().into_iter().enumerate() {
                    let keep = 1.0 - h * (degrees[i] + beta);
                    Zip::from(&mut row)
                        .and(&x.row(i))
                        .and(&e.v.row(i))
                        .for_each(|o, &xi, &vi| *o = keep * xi + h * beta * vi);
                    for (j, xj) in x.rows().into_iter().enumerate() {
                        let w = a[[i, j]];
                        if w != 0.0 {
                            row.scaled_add(h * w, &xj);
                        }
                    }
                }
                let mut y_next = y.to_owned();
                y_next.scaled_add(h, &self.laplacian_flow(e.z.view()));
                Ok(NetworkState {
                    x: x_next,
                    y: y_next,
                    t: t + h,
                })
            }
            Method::Rk4 => {
                let (k1, _) = self.derivative_at(x, y, t, tally)?;
                let stage = |k: &Derivative, c: f64| (&x + &(c * &k.dx), &y + &(c * &k.dy));
                let (x2, y2) = stage(&k1, 0.5 * h);
                let (k2, _) = self.derivative_at(x2.view(), y2.view(), t + 0.5 * h, tally)?;
                let (x3, y3) = stage(&k2, 0.5 * h);
                let (k3, _) = self.derivative_at(x3.view(), y3.view(), t + 0.5 * h, tally)?;
                let (x4, y4) = stage(&k3, h);
                let (k4, _) = self.derivative_at(x4.view(), y4.view(), t + h, tally)?;
                let combine = |a: &Array2<f64>, b: &Array2<f64>, c: &Array2<f64>, d: &Array2<f64>| {
                    (a + &(2.0 * b) + &(2.0 * c) + d) * (h / 6.0)
                };
                Ok(NetworkState {
                    x: &x + &combine(&k1.dx, &k2.dx, &k3.dx, &k4.dx),
                    y: &y + &combine(&k1.dy, &k2.dy, &k3.dy, &k4.dy),
                    t: t + h,
                })
            }
        }
    }

    /// Checks the standing assumptions and the initial point, then returns
    /// the initial state.
    pub fn initial_state(&self, init: &InitialState) -> Result<NetworkState> {
        self.graph.validate_assumptions()?;
        let x = init.resolve(self.graph.n_agents(), self.set)?;
        for (agent, row) in x.rows().into_iter().enumerate() {
            if !self.set.contains(&row.to_vec(), INIT_FEAS_TOL)? {
                return Err(Error::InfeasibleInitialState { agent });
            }
        }
        Ok(NetworkState::new(x))
    }

    /// Integrates to the horizon, recording metrics every `record_every`
    /// time units. Computes its own reference value.
    pub fn simulate(&self, cfg: &IntegratorConfig, init: &InitialState) -> Result<RunRecord> {
        let reference = reference_solution(self.objective, self.set, RUN_REFERENCE_TOL)?;
        self.simulate_with_reference(cfg, init, &reference)
    }

    pub fn simulate_with_reference(
        &self,
        cfg: &IntegratorConfig,
        init: &InitialState,
        reference: &Reference,
    ) -> Result<RunRecord> {
        cfg.validate()?;
        self.check_step_bound(cfg)?;
        let mut state = self.initial_state(init)?;
        let ctx = MetricContext::new(self.objective, self.set, reference.value);
        let mut rec = RunRecord {
            algorithm: "cg_ode".into(),
            ..RunRecord::default()
        };
        let mut tally = SubproblemTally::new(SubproblemKind::Lmo);
        let started = Instant::now();
        let n_steps = cfg.n_steps();
        let stride = cfg.record_stride();
        let h = cfg.step;
        for k in 0..=n_steps {
            if k % stride == 0 || k == n_steps {
                let g = self.objective.stacked_grad(state.x.view())?;
                let z = &state.y + &g;
                ctx.record(
                    &mut rec,
                    state.t,
                    k as u64,
                    started.elapsed().as_secs_f64(),
                    state.x.view(),
                    z.view(),
                    g.view(),
                    Some(state.y.view()),
                )?;
            }
            if k == n_steps {
                break;
            }
            let mut next = self.advance(&state, cfg.method, h, &mut Some(&mut tally))?;
            next.t = (k + 1) as f64 * h;
            if next.x.iter().chain(next.y.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { t: next.t });
            }
            state = next;
        }
        rec.subproblem_timings.push(tally);
        rec.final_x = Some(state.x);
        Ok(rec)
    }
}
