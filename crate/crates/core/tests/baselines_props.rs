use dcpf_core::baselines::{run_defw, run_discretized_cg, run_projected, DiscreteConfig, ProjectedConfig};
use dcpf_core::metrics::{mean_row, reference_solution};
use dcpf_core::objective::random_instance;
use dcpf_core::{Digraph, FeasibleSet, InitialState, IntegratorConfig, Network, Schedule, TopologyKind};
use proptest::prelude::*;

fn set_of_kind(kind: usize, n: usize) -> FeasibleSet {
    match kind {
        0 => FeasibleSet::cube(n, 1.0).unwrap(),
        1 => FeasibleSet::simplex(n, 1.5).unwrap(),
        _ => FeasibleSet::l1_ball(n, 1.5).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn discrete_iterates_stay_feasible(
        n_agents in 3..=8usize,
        dim in 1..=5usize,
        kind in 0..3usize,
        delta in 0.05..0.5f64,
        seed in any::<u64>(),
    ) {
        let mixing = Digraph::topology(TopologyKind::UndirectedRing, n_agents, 1.0)
            .unwrap()
            .mixing()
            .unwrap();
        let obj = random_instance(n_agents, dim, seed, 5.0).unwrap();
        let set = set_of_kind(kind, dim);
        let reference = reference_solution(&obj, &set, 1e-10).unwrap();
        let cfg = DiscreteConfig { delta, n_iters: 60, record_every: 1, ..Default::default() };
        let init = InitialState::Seeded(seed);
        for rec in [
            run_discretized_cg(&mixing, &obj, &set, &cfg, &init, &reference).unwrap(),
            run_defw(&mixing, &obj, &set, &cfg, &init, &reference).unwrap(),
        ] {
            prop_assert!(rec.max_infeasibility.iter().all(|&d| d <= 1e-9), "{}", rec.algorithm);
        }
    }

    #[test]
    fn discrete_tracking_conserves_gradient_sum(
        n_agents in 3..=8usize,
        dim in 1..=5usize,
        kind in 0..3usize,
        seed in any::<u64>(),
    ) {
        let mixing = Digraph::topology(TopologyKind::Complete, n_agents, 1.0)
            .unwrap()
            .mixing()
            .unwrap();
        let obj = random_instance(n_agents, dim, seed, 5.0).unwrap();
        let set = set_of_kind(kind, dim);
        let reference = reference_solution(&obj, &set, 1e-10).unwrap();
        let cfg = DiscreteConfig { n_iters: 100, record_every: 1, ..Default::default() };
        let rec = run_discretized_cg(&mixing, &obj, &set, &cfg, &InitialState::Seeded(seed), &reference)
            .unwrap();
        prop_assert!(rec.z_sum_residual.iter().all(|&r| r <= 1e-8));
    }
}

#[test]
fn projected_and_ode_agree_on_minimizer() {
    let (n_agents, dim) = (20, 16);
    let g = Digraph::topology(TopologyKind::UndirectedRing, n_agents, 1.0).unwrap();
    let obj = random_instance(n_agents, dim, 2024 + dim as u64, 4.0).unwrap();
    let set = FeasibleSet::cube(dim, 2.0).unwrap();
    let reference = reference_solution(&obj, &set, 1e-12).unwrap();
    let init = InitialState::Seeded(7);
    let net = Network::new(&g, &obj, &set, Schedule::default()).unwrap();
    let ode = net
        .simulate_with_reference(&IntegratorConfig::euler(0.25, 1600.0, 10.0), &init, &reference)
        .unwrap();
    let cfg = ProjectedConfig { step: 0.3, alpha: 0.3, horizon: 1600.0, record_every: 10.0 };
    let proj = run_projected(&g, &obj, &set, &cfg, &init, &reference).unwrap();
    let a = mean_row(ode.final_x.as_ref().unwrap().view());
    let b = mean_row(proj.final_x.as_ref().unwrap().view());
    let dist = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    assert!(dist < 1e-2, "final means differ by {dist}");
}

#[test]
fn defw_gap_is_within_twice_discrete_gap() {
    let (n_agents, dim) = (20, 16);
    let mixing = Digraph::topology(TopologyKind::UndirectedRing, n_agents, 1.0)
        .unwrap()
        .mixing()
        .unwrap();
    let obj = random_instance(n_agents, dim, 2024 + dim as u64, 4.0).unwrap();
    let set = FeasibleSet::cube(dim, 2.0).unwrap();
    let reference = reference_solution(&obj, &set, 1e-12).unwrap();
    let cfg = DiscreteConfig { n_iters: 2000, record_every: 100, ..Default::default() };
    let init = InitialState::Seeded(7);
    let cg = run_discretized_cg(&mixing, &obj, &set, &cfg, &init, &reference).unwrap();
    let defw = run_defw(&mixing, &obj, &set, &cfg, &init, &reference).unwrap();
    let (a, b) = (*cg.optimality_gap.last().unwrap(), *defw.optimality_gap.last().unwrap());
    assert!(b <= 2.0 * a, "defw gap {b:.3e} vs discrete gap {a:.3e}");
}
