//! End-to-end acceptance suite. Each test prints one PASS/FAIL line; run
//! with `cargo test -p dcpf-harness --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use dcpf_core::metrics::{lemma2_numeric_check, reference_solution, ScalarFn, RUN_REFERENCE_TOL};
use dcpf_core::objective::{fig1_instance, random_instance};
use dcpf_core::set::project_simplex;
use dcpf_core::{
    Digraph, FeasibleSet, InitialState, IntegratorConfig, Network, RunRecord, Schedule, TopologyKind,
};
use dcpf_harness::experiment::{self, run_algorithm, Instance};
use dcpf_harness::{Algorithm, ExperimentConfig, RunOptions};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, pass: bool, detail: String) {
    println!("[criterion {criterion}] {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion}: {detail}");
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_path(&config_path(name)).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn sample_at(rec: &RunRecord, t: f64) -> usize {
    rec.times
        .iter()
        .position(|&s| s >= t - 1e-9)
        .unwrap_or(rec.len() - 1)
}

fn run_fig1() -> RunRecord {
    let cfg = load("fig1.toml");
    let inst = Instance::build(&cfg).unwrap();
    let reference = inst.reference().unwrap();
    run_algorithm(&inst, &cfg, Algorithm::CgOde, &reference).unwrap()
}

fn fig1_run() -> &'static RunRecord {
    static RUN: OnceLock<RunRecord> = OnceLock::new();
    RUN.get_or_init(run_fig1)
}

/// The Fig. 1 run followed by ten seeded N = 20, n = 16 runs.
fn invariance_runs() -> &'static [RunRecord] {
    static RUNS: OnceLock<Vec<RunRecord>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let graph = Digraph::topology(TopologyKind::UndirectedRing, 20, 1.0).unwrap();
        let set = FeasibleSet::cube(16, 2.0).unwrap();
        let mut out = vec![fig1_run().clone()];
        for seed in 0..10u64 {
            let obj = random_instance(20, 16, 100 + seed, 4.0).unwrap();
            let reference = reference_solution(&obj, &set, RUN_REFERENCE_TOL).unwrap();
            let net = Network::new(&graph, &obj, &set, Schedule::default()).unwrap();
            let cfg = IntegratorConfig::euler(net.euler_step_bound(), 100.0, 1.0);
            out.push(
                net.simulate_with_reference(&cfg, &InitialState::Seeded(seed), &reference)
                    .unwrap(),
            );
        }
        out
    })
}

#[test]
fn criterion_01_fig1_converges_to_origin() {
    let start = Instant::now();
    let rec = &run_fig1();
    let elapsed = start.elapsed().as_secs_f64();
    let x = rec.final_x.as_ref().unwrap();
    let worst = x.rows().into_iter().map(|r| norm(&r.to_vec())).fold(0.0, f64::max);
    let gap = *rec.optimality_gap.last().unwrap();
    report(
        1,
        worst < 1e-2 && gap < 1e-3 && elapsed < 5.0,
        format!("max |x_i(T)| = {worst:.3e} (< 1e-2), gap(T) = {gap:.3e} (< 1e-3), {elapsed:.2} s (< 5 s)"),
    );
}

#[test]
fn criterion_02_consensus_and_tracking_vanish() {
    let rec = fig1_run();
    let end = rec.len() - 1;
    let half = sample_at(rec, rec.times[end] / 2.0);
    let (c, w) = (rec.consensus_err[end], rec.tracking_err[end]);
    let (c2, w2) = (rec.consensus_err[half], rec.tracking_err[half]);
    report(
        2,
        c < 1e-3 && w < 1e-3 && c < c2 && w < w2,
        format!(
            "consensus(T) = {c:.3e} (< 1e-3, T/2: {c2:.3e}), tracking(T) = {w:.3e} (< 1e-3, T/2: {w2:.3e})"
        ),
    );
}

#[test]
fn criterion_03_iterates_stay_feasible() {
    let runs = invariance_runs();
    let worst = runs
        .iter()
        .flat_map(|r| r.max_infeasibility.iter().copied())
        .fold(0.0, f64::max);
    let samples: usize = runs.iter().map(RunRecord::len).sum();
    report(
        3,
        worst <= 1e-9,
        format!("{} runs, {samples} samples, worst distance to the set {worst:.3e} (<= 1e-9)", runs.len()),
    );
}

fn box_vertices(lower: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
    (0..1usize << lower.len())
        .map(|mask| {
            (0..lower.len())
                .map(|k| if mask >> k & 1 == 1 { upper[k] } else { lower[k] })
                .collect()
        })
        .collect()
}

fn signed_axes(dim: usize, radius: f64, both: bool) -> Vec<Vec<f64>> {
    let signs: &[f64] = if both { &[1.0, -1.0] } else { &[1.0] };
    (0..dim)
        .flat_map(|k| {
            signs.iter().map(move |s| {
                let mut e = vec![0.0; dim];
                e[k] = s * radius;
                e
            })
        })
        .collect()
}

/// A random set of the given variant with its explicit vertex list.
fn random_set(variant: usize, dim: usize, rng: &mut ChaCha8Rng) -> (FeasibleSet, Vec<Vec<f64>>) {
    let radius = rng.random_range(0.1..4.0);
    match variant {
        0 => {
            let lower: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.0..3.0)).collect();
            let verts = box_vertices(&lower, &upper);
            (FeasibleSet::new_box(lower, upper).unwrap(), verts)
        }
        1 => (FeasibleSet::simplex(dim, radius).unwrap(), signed_axes(dim, radius, false)),
        2 => (FeasibleSet::l1_ball(dim, radius).unwrap(), signed_axes(dim, radius, true)),
        _ => {
            let m = rng.random_range(1..=12);
            let v = Array2::from_shape_fn((m, dim), |_| rng.random_range(-3.0..3.0));
            let verts = v.rows().into_iter().map(|r| r.to_vec()).collect();
            (FeasibleSet::polytope(v).unwrap(), verts)
        }
    }
}

fn simplex_by_active_sets(y: &[f64], radius: f64) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1..1usize << n {
        let support: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
        let tau = (support.iter().map(|&k| y[k]).sum::<f64>() - radius) / support.len() as f64;
        let mut x = vec![0.0; n];
        for &k in &support {
            x[k] = y[k] - tau;
        }
        if x.iter().all(|&v| v >= -1e-14) && best.as_ref().is_none_or(|(d, _)| dist(y, &x) < *d) {
            best = Some((dist(y, &x), x));
        }
    }
    best.unwrap().1
}

#[test]
fn criterion_04_oracles_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lmo_excess = 0.0f64;
    for variant in 0..4 {
        for _ in 0..1000 {
            let dim = rng.random_range(1..=10);
            let (set, verts) = random_set(variant, dim, &mut rng);
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let v = set.lmo(&z).unwrap();
            let best = verts.iter().map(|w| dot(w, &z)).fold(f64::INFINITY, f64::min);
            lmo_excess = lmo_excess.max(dot(&v, &z) - best);
        }
    }

    let mut proj_excess = 0.0f64;
    for variant in 0..4 {
        for _ in 0..6 {
            let dim = rng.random_range(1..=5);
            let (set, _) = random_set(variant, dim, &mut rng);
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-6.0..6.0)).collect();
            let d = dist(&x, &set.project(&x).unwrap());
            for seed in 0..10_000u64 {
                proj_excess = proj_excess.max(d - dist(&x, &set.sample_point(seed)));
            }
        }
    }

    let mut simplex_err = 0.0f64;
    for _ in 0..1000 {
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let radius = rng.random_range(0.1..3.0);
        let p = project_simplex(&y, radius);
        simplex_err = simplex_err.max(dist(&p, &simplex_by_active_sets(&y, radius)));
    }

    report(
        4,
        lmo_excess <= 1e-12 && proj_excess <= 1e-9 && simplex_err <= 1e-10,
        format!(
            "lmo excess {lmo_excess:.2e} (<= 1e-12), projection excess {proj_excess:.2e} (<= 1e-9), \
             simplex mismatch {simplex_err:.2e} (<= 1e-10)"
        ),
    );
}

#[test]
fn criterion_05_gradients_match_finite_differences() {
    let h = 1e-5;
    let mut objectives = vec![fig1_instance().0];
    for (seed, cond) in [(1, 1.0), (2, 4.0), (3, 100.0)] {
        objectives.push(random_instance(5, 6, seed, cond).unwrap());
    }
    objectives.push(random_instance(20, 16, 2040, 4.0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for obj in &objectives {
        let agg = obj.aggregate();
        for _ in 0..10 {
            let x: Vec<f64> = (0..obj.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            for cost in obj.costs().iter().chain([&agg]) {
                let g = cost.grad(&x).unwrap();
                let fd: Vec<f64> = (0..x.len())
                    .map(|k| {
                        let (mut hi, mut lo) = (x.clone(), x.clone());
                        hi[k] += h;
                        lo[k] -= h;
                        (cost.eval(&hi).unwrap() - cost.eval(&lo).unwrap()) / (2.0 * h)
                    })
                    .collect();
                let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
                worst = worst.max(norm(&diff) / norm(&g).max(1.0));
            }
        }
    }
    report(
        5,
        worst < 1e-6,
        format!("{} objectives, worst relative error {worst:.3e} (< 1e-6)", objectives.len()),
    );
}

#[test]
fn criterion_06_fig2_tiers_reach_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        output_dir: Some(dir.path().to_path_buf()),
        seed: None,
    };
    let mut pass = true;
    let mut lines = Vec::new();
    for n in [16, 64, 256] {
        let start = Instant::now();
        let out = experiment::compare(&load(&format!("fig2_n{n}.toml")), &opts).unwrap();
        let secs = start.elapsed().as_secs_f64();
        pass &= secs < 60.0;
        let mut parts = Vec::new();
        for rec in &out.records {
            let hit = rec.optimality_gap.iter().position(|&g| g < 1e-2);
            pass &= hit.is_some();
            let when = hit.map_or("never".to_owned(), |k| format!("t={}", rec.times[k]));
            parts.push(format!(
                "{} final {:.2e} ({when})",
                rec.algorithm,
                rec.optimality_gap.last().unwrap()
            ));
        }
        lines.push(format!("n={n} [{secs:.1} s]: {}", parts.join(", ")));
    }
    report(6, pass, format!("gap < 1e-2 within budget, < 60 s per tier; {}", lines.join("; ")));
}

#[test]
fn criterion_07_projection_outgrows_lmo() {
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        output_dir: Some(dir.path().to_path_buf()),
        seed: None,
    };
    let out = experiment::bench(&load("table1.toml"), &opts).unwrap();
    let mut dims: Vec<usize> = out.timings.iter().map(|r| r.dim).collect();
    dims.dedup();
    let mean = |dim: usize, kind: &str| {
        out.timings
            .iter()
            .find(|r| r.dim == dim && r.kind == kind)
            .unwrap()
            .timing
            .mean_ns
    };
    let ratios: Vec<f64> = dims.iter().map(|&d| mean(d, "projection") / mean(d, "lmo")).collect();
    let exceeds = dims
        .iter()
        .filter(|&&d| d >= 256)
        .all(|&d| mean(d, "projection") > mean(d, "lmo"));
    let monotone = ratios.windows(2).all(|w| w[1] >= w[0]);
    let shown: Vec<String> = dims.iter().zip(&ratios).map(|(d, r)| format!("n={d}: {r:.1}")).collect();
    report(
        7,
        exceeds && monotone,
        format!("projection/LMO ratios {}", shown.join(", ")),
    );
}

#[test]
fn criterion_08_conservation_identities() {
    let mut y_ok = true;
    let (mut y_worst, mut z_worst) = (0.0f64, 0.0f64);
    for rec in invariance_runs() {
        let horizon = *rec.times.last().unwrap();
        for &y in &rec.y_sum_norm {
            y_ok &= y <= 1e-8 * (1.0 + horizon);
            y_worst = y_worst.max(y);
        }
        z_worst = rec.z_sum_residual.iter().copied().fold(z_worst, f64::max);
    }
    report(
        8,
        y_ok && z_worst <= 1e-8,
        format!("max |sum y| = {y_worst:.3e} (<= 1e-8 (1+T)), max z-sum residual {z_worst:.3e} (<= 1e-8)"),
    );
}

#[test]
fn criterion_09_lemma2_cases() {
    let forced = lemma2_numeric_check(ScalarFn::Constant(1.0), ScalarFn::ExpDecay, 1.0, 20.0).unwrap();
    let horizon = 0.1;
    let free = lemma2_numeric_check(ScalarFn::Constant(1.0), ScalarFn::Constant(0.0), 1.0, horizon)
        .unwrap();
    let free_rel = (free - (-horizon).exp()).abs() / (-horizon).exp();
    let harmonic =
        lemma2_numeric_check(ScalarFn::InverseLinear, ScalarFn::InverseLinear, 1.0, 1e4).unwrap();
    report(
        9,
        forced < 1e-6 && free_rel <= 1e-4 && harmonic < 1e-2,
        format!(
            "eps=exp(-t), T=20: {forced:.3e} (< 1e-6); eps=0, T={horizon}: relative error vs e^-T \
             {free_rel:.2e} (<= 1e-4); gamma=eps=1/(1+t), T=1e4: {harmonic:.3e} (< 1e-2)"
        ),
    );
}

fn dcpf(args: &[&str], out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_dcpf"))
        .args(args)
        .arg("--quiet")
        .arg("--output-dir")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn criterion_10_repeat_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fig1 = config_path("fig1.toml");
    let fig2 = config_path("fig2_n16.toml");
    for dir in [a.path(), b.path()] {
        dcpf(&["run", fig1.to_str().unwrap()], dir);
        dcpf(&["compare", fig2.to_str().unwrap()], dir);
    }
    let mut files = vec!["fig1.csv".to_owned(), "fig1.config.toml".to_owned()];
    for alg in ["cg_ode", "cg_discrete", "defw", "projected"] {
        files.push(format!("fig2_n16_{alg}.csv"));
    }
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap())
        .collect();
    report(
        10,
        differing.is_empty(),
        format!("{} files compared, differing: {differing:?}", files.len()),
    );
}
