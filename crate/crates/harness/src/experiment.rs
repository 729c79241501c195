//! Builds a problem instance from a config, validates every requested
//! algorithm against it, then runs and writes CSV output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dcpf_core::baselines::{run_defw, run_discretized_cg, run_projected, DiscreteConfig, ProjectedConfig};
use dcpf_core::dynamics::Method;
use dcpf_core::metrics::{
    reference_solution, time_subproblem, SubproblemKind, MIN_TIMING_REPEATS, RUN_REFERENCE_TOL,
};
use dcpf_core::objective::{fig1_instance, random_instance};
use dcpf_core::{
    Digraph, Error as CoreError, FeasibleSet, InitialState, IntegratorConfig, Network, Objective,
    QuadraticCost, Reference, RunRecord, Schedule, TopologyKind,
};
use ndarray::{Array1, Array2};

use crate::config::{
    Algorithm, BenchSection, BenchSetKind, ExperimentConfig, GraphConfig, ObjectiveConfig, SetConfig,
};
use crate::error::{config_err, HarnessError, Result};
use crate::output::{write_merged_csv, write_run_csv, write_timing_csv, TimingRow};

const MIXING_TOL: f64 = 1e-12;
const INIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for relative output paths; the working directory if unset.
    pub output_dir: Option<PathBuf>,
    /// Replaces the config's top-level seed.
    pub seed: Option<u64>,
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub records: Vec<RunRecord>,
    pub timings: Vec<TimingRow>,
    pub files: Vec<PathBuf>,
}

/// A fully validated problem: graph, costs, set and starting point.
#[derive(Debug, Clone)]
pub struct Instance {
    pub graph: Digraph,
    pub objective: Objective,
    pub set: FeasibleSet,
    pub schedule: Schedule,
    pub init: InitialState,
}

fn rows_to_array(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(config_err(format!("{what} must be a nonempty rectangular matrix")));
    }
    Ok(Array2::from_shape_fn((rows.len(), n), |(i, j)| rows[i][j]))
}

fn build_graph(g: &GraphConfig) -> Result<Digraph> {
    let (kind, n, w) = match *g {
        GraphConfig::DirectedRing { n_agents, weight } => (TopologyKind::DirectedRing, n_agents, weight),
        GraphConfig::UndirectedRing { n_agents, weight } => (TopologyKind::UndirectedRing, n_agents, weight),
        GraphConfig::Complete { n_agents, weight } => (TopologyKind::Complete, n_agents, weight),
        GraphConfig::Explicit { ref adjacency } => return Ok(Digraph::from_rows(adjacency)?),
    };
    Ok(Digraph::topology(kind, n, w)?)
}

fn build_objective(o: &ObjectiveConfig, n_agents: usize, seed: u64) -> Result<Objective> {
    let obj = match o {
        ObjectiveConfig::Fig1 => fig1_instance().0,
        ObjectiveConfig::Random {
            dim,
            conditioning,
            seed: own,
        } => random_instance(n_agents, *dim, own.unwrap_or(seed), *conditioning)?,
        ObjectiveConfig::Isotropic { centers, scale } => Objective::new(
            centers
                .iter()
                .map(|c| QuadraticCost::isotropic(c, *scale))
                .collect::<std::result::Result<_, _>>()?,
        )?,
        ObjectiveConfig::Explicit { costs } => Objective::new(
            costs
                .iter()
                .map(|c| {
                    let q = rows_to_array(&c.q, "cost matrix q")?;
                    Ok(QuadraticCost::new(q, Array1::from(c.b.clone()), c.c)?)
                })
                .collect::<Result<_>>()?,
        )?,
    };
    if obj.n_agents() != n_agents {
        return Err(config_err(format!(
            "objective has {} agents but the graph has {n_agents}",
            obj.n_agents()
        )));
    }
    Ok(obj)
}

fn build_set(s: &SetConfig, dim: usize) -> Result<FeasibleSet> {
    let set = match s {
        SetConfig::Box { lower, upper } => FeasibleSet::new_box(lower.clone(), upper.clone())?,
        SetConfig::Cube { radius } => FeasibleSet::cube(dim, *radius)?,
        SetConfig::Simplex { radius } => FeasibleSet::simplex(dim, *radius)?,
        SetConfig::L1Ball { radius } => FeasibleSet::l1_ball(dim, *radius)?,
        SetConfig::Polytope { vertices } => FeasibleSet::from_vertex_rows(vertices)?,
    };
    if set.dim() != dim {
        return Err(config_err(format!(
            "set has dimension {} but the objective has {dim}",
            set.dim()
        )));
    }
    Ok(set)
}

impl Instance {
    /// Checks graph assumptions, dimensions and initial feasibility.
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let graph = build_graph(cfg.graph()?)?;
        graph.validate_assumptions()?;
        let objective = build_objective(cfg.objective()?, graph.n_agents(), cfg.seed)?;
        let set = build_set(cfg.set()?, objective.dim())?;
        cfg.schedule.validate()?;
        let init = match &cfg.init.x0 {
            Some(rows) => InitialState::Explicit(rows_to_array(rows, "init.x0")?),
            None => InitialState::Seeded(cfg.init.seed.unwrap_or(cfg.seed)),
        };
        let x0 = init.resolve(graph.n_agents(), &set)?;
        for (agent, row) in x0.rows().into_iter().enumerate() {
            if !set.contains(&row.to_vec(), INIT_TOL)? {
                return Err(CoreError::InfeasibleInitialState { agent }.into());
            }
        }
        Ok(Self {
            graph,
            objective,
            set,
            schedule: cfg.schedule,
            init,
        })
    }

    /// Doubly stochastic weights for the discrete baselines: the graph
    /// itself if it already qualifies, else uniform `1/deg` weights.
    pub fn mixing(&self) -> Result<Digraph> {
        if self.graph.is_doubly_stochastic(MIXING_TOL) {
            Ok(self.graph.clone())
        } else {
            Ok(self.graph.mixing()?)
        }
    }

    pub fn reference(&self) -> Result<Reference> {
        Ok(reference_solution(&self.objective, &self.set, RUN_REFERENCE_TOL)?)
    }
}

fn integrator(cfg: &ExperimentConfig) -> Result<IntegratorConfig> {
    let s = cfg
        .integrator
        .ok_or_else(|| config_err("cg_ode needs an [integrator] section"))?;
    let ic = IntegratorConfig {
        method: s.method,
        step: s.step,
        horizon: s.horizon,
        record_every: s.record_every,
        exact_feasibility: s.exact_feasibility,
    };
    ic.validate()?;
    Ok(ic)
}

fn discrete(cfg: &ExperimentConfig, alg: Algorithm) -> Result<DiscreteConfig> {
    let s = cfg
        .discrete
        .ok_or_else(|| config_err(format!("{alg} needs a [discrete] section")))?;
    let dc = DiscreteConfig {
        delta: s.delta,
        schedule: cfg.schedule,
        n_iters: s.n_iters,
        record_every: s.record_every,
    };
    dc.validate()?;
    Ok(dc)
}

fn projected(cfg: &ExperimentConfig) -> Result<ProjectedConfig> {
    let s = cfg
        .projected
        .ok_or_else(|| config_err("projected needs a [projected] section"))?;
    let pc = ProjectedConfig {
        step: s.step,
        alpha: s.alpha,
        horizon: s.horizon,
        record_every: s.record_every,
    };
    pc.validate()?;
    Ok(pc)
}

/// Rejects anything that would make `alg` fail before its first step.
pub fn validate_algorithm(inst: &Instance, cfg: &ExperimentConfig, alg: Algorithm) -> Result<()> {
    match alg {
        Algorithm::CgOde => {
            let ic = integrator(cfg)?;
            let net = Network::new(&inst.graph, &inst.objective, &inst.set, inst.schedule)?;
            let bound = net.euler_step_bound();
            if ic.method == Method::Euler && ic.exact_feasibility && ic.step > bound {
                return Err(CoreError::StepBound { h: ic.step, bound }.into());
            }
        }
        Algorithm::CgDiscrete | Algorithm::Defw => {
            let dc = discrete(cfg, alg)?;
            inst.mixing()?;
            if alg == Algorithm::CgDiscrete && dc.delta + dc.eta(0) > 1.0 {
                return Err(config_err(format!(
                    "cg_discrete needs delta + eta^0 <= 1, got delta = {}",
                    dc.delta
                )));
            }
        }
        Algorithm::Projected => {
            projected(cfg)?;
        }
    }
    Ok(())
}

/// Runs one algorithm on a validated instance.
pub fn run_algorithm(
    inst: &Instance,
    cfg: &ExperimentConfig,
    alg: Algorithm,
    reference: &Reference,
) -> Result<RunRecord> {
    let mut rec = match alg {
        Algorithm::CgOde => {
            let net = Network::new(&inst.graph, &inst.objective, &inst.set, inst.schedule)?;
            net.simulate_with_reference(&integrator(cfg)?, &inst.init, reference)?
        }
        Algorithm::CgDiscrete => run_discretized_cg(
            &inst.mixing()?,
            &inst.objective,
            &inst.set,
            &discrete(cfg, alg)?,
            &inst.init,
            reference,
        )?,
        Algorithm::Defw => run_defw(
            &inst.mixing()?,
            &inst.objective,
            &inst.set,
            &discrete(cfg, alg)?,
            &inst.init,
            reference,
        )?,
        Algorithm::Projected => run_projected(
            &inst.graph,
            &inst.objective,
            &inst.set,
            &projected(cfg)?,
            &inst.init,
            reference,
        )?,
    };
    rec.config_echo = Some(cfg.source.clone());
    Ok(rec)
}

fn effective(cfg: &ExperimentConfig, opts: &RunOptions) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
        let _ = writeln!(cfg.source, "# seed overridden on the command line: {seed}");
    }
    cfg
}

fn resolve(opts: &RunOptions, name: &Path) -> PathBuf {
    match &opts.output_dir {
        Some(dir) if name.is_relative() => dir.join(name),
        _ => name.to_path_buf(),
    }
}

fn with_suffix(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn write_echo(path: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let echo = with_suffix(path, ".config", "toml");
    std::fs::write(&echo, &cfg.source).map_err(|source| HarnessError::Write {
        path: echo.clone(),
        source,
    })?;
    Ok(echo)
}

/// Validates everything, then runs the single configured algorithm.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let cfg = effective(cfg, opts);
    let algs = cfg.algorithm_list();
    let [alg] = algs[..] else {
        return Err(config_err(format!(
            "run needs exactly one algorithm, got {}",
            algs.len()
        )));
    };
    let inst = Instance::build(&cfg)?;
    validate_algorithm(&inst, &cfg, alg)?;
    let reference = inst.reference()?;
    let rec = run_algorithm(&inst, &cfg, alg, &reference)?;
    let path = resolve(opts, &cfg.output_name());
    write_run_csv(&path, &rec)?;
    let echo = write_echo(&path, &cfg)?;
    Ok(Outcome {
        records: vec![rec],
        timings: Vec::new(),
        files: vec![path, echo],
    })
}

/// Runs every listed algorithm on one shared instance and starting point.
pub fn compare(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let cfg = effective(cfg, opts);
    let algs = cfg.algorithm_list();
    if algs.len() < 2 {
        return Err(config_err(format!(
            "compare needs at least two algorithms, got {}",
            algs.len()
        )));
    }
    let inst = Instance::build(&cfg)?;
    for &alg in &algs {
        validate_algorithm(&inst, &cfg, alg)?;
    }
    let reference = inst.reference()?;
    let base = resolve(opts, &cfg.output_name());
    let mut out = Outcome::default();
    for &alg in &algs {
        let rec = run_algorithm(&inst, &cfg, alg, &reference)?;
        let path = with_suffix(&base, &format!("_{alg}"), "csv");
        write_run_csv(&path, &rec)?;
        out.files.push(path);
        out.records.push(rec);
    }
    let merged = with_suffix(&base, "_merged", "csv");
    write_merged_csv(&merged, &out.records)?;
    out.files.push(merged);
    out.files.push(write_echo(&base, &cfg)?);
    Ok(out)
}

fn cross_polytope(dim: usize, radius: f64) -> Result<FeasibleSet> {
    let mut v = Array2::zeros((2 * dim, dim));
    for k in 0..dim {
        v[[2 * k, k]] = radius;
        v[[2 * k + 1, k]] = -radius;
    }
    Ok(FeasibleSet::polytope(v)?)
}

fn bench_sets(kind: BenchSetKind, dim: usize, radius: f64) -> Result<(FeasibleSet, FeasibleSet)> {
    Ok(match kind {
        BenchSetKind::BoxVsPolytope => (FeasibleSet::cube(dim, radius)?, cross_polytope(dim, radius)?),
        BenchSetKind::Box => {
            let s = FeasibleSet::cube(dim, radius)?;
            (s.clone(), s)
        }
        BenchSetKind::Simplex => {
            let s = FeasibleSet::simplex(dim, radius)?;
            (s.clone(), s)
        }
        BenchSetKind::L1Ball => {
            let s = FeasibleSet::l1_ball(dim, radius)?;
            (s.clone(), s)
        }
    })
}

fn validate_bench(b: &BenchSection) -> Result<()> {
    if b.dims.is_empty() || b.dims.contains(&0) {
        return Err(config_err("bench.dims must be a nonempty list of positive sizes"));
    }
    if b.repeats < MIN_TIMING_REPEATS {
        return Err(config_err(format!(
            "bench.repeats must be at least {MIN_TIMING_REPEATS}, got {}",
            b.repeats
        )));
    }
    if !(b.radius > 0.0 && b.radius.is_finite()) {
        return Err(config_err(format!("bench.radius must be positive, got {}", b.radius)));
    }
    Ok(())
}

/// Times one LMO and one projection per dimension, single-threaded.
pub fn bench(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let cfg = effective(cfg, opts);
    let b = cfg
        .bench
        .as_ref()
        .ok_or_else(|| config_err("bench needs a [bench] section"))?;
    validate_bench(b)?;
    let mut rows = Vec::with_capacity(2 * b.dims.len());
    for &dim in &b.dims {
        let (lmo_set, proj_set) = bench_sets(b.set_kind, dim, b.radius)?;
        // Probes land outside the set so the projection has work to do.
        let probe = FeasibleSet::cube(dim, 1.5 * b.radius)?.sample_point(cfg.seed ^ dim as u64);
        for (kind, set) in [(SubproblemKind::Lmo, &lmo_set), (SubproblemKind::Projection, &proj_set)] {
            rows.push(TimingRow {
                kind: kind.as_str().to_owned(),
                set: set.kind().to_owned(),
                dim,
                timing: time_subproblem(kind, set, &probe, b.repeats)?,
            });
        }
    }
    let path = resolve(opts, &cfg.output_name());
    write_timing_csv(&path, &rows)?;
    Ok(Outcome {
        records: Vec::new(),
        timings: rows,
        files: vec![path],
    })
}

/// Final metrics of a run, one line.
pub fn summary(rec: &RunRecord) -> String {
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    format!(
        "{:<12} t={:<10} consensus={:.3e} tracking={:.3e} gap={:.3e} fw_gap={:.3e}",
        rec.algorithm,
        last(&rec.times),
        last(&rec.consensus_err),
        last(&rec.tracking_err),
        last(&rec.optimality_gap),
        last(&rec.fw_gap),
    )
}

/// Mean times in milliseconds, one row per dimension.
pub fn timing_table(rows: &[TimingRow]) -> String {
    let mut dims: Vec<usize> = rows.iter().map(|r| r.dim).collect();
    dims.dedup();
    let mut out = format!("{:>8} {:>16} {:>16} {:>10}\n", "n", "LMO (ms)", "projection (ms)", "ratio");
    for dim in dims {
        let mean = |kind: &str| {
            rows.iter()
                .find(|r| r.dim == dim && r.kind == kind)
                .map_or(f64::NAN, |r| r.timing.mean_ns)
        };
        let (l, p) = (mean("lmo"), mean("projection"));
        let _ = writeln!(out, "{dim:>8} {:>16.6} {:>16.6} {:>10.1}", l / 1e6, p / 1e6, p / l);
    }
    out
}
