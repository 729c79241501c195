use dcpf_core::set::project_simplex;
use dcpf_core::FeasibleSet;
use ndarray::Array2;
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Every vertex of the set, listed explicitly.
fn vertices(set: &FeasibleSet) -> Vec<Vec<f64>> {
    match set {
        FeasibleSet::Box { lower, upper } => {
            let n = lower.len();
            (0..1usize << n)
                .map(|mask| {
                    (0..n)
                        .map(|k| if mask >> k & 1 == 1 { upper[k] } else { lower[k] })
                        .collect()
                })
                .collect()
        }
        FeasibleSet::Simplex { dim, radius } => (0..*dim)
            .map(|k| {
                let mut e = vec![0.0; *dim];
                e[k] = *radius;
                e
            })
            .collect(),
        FeasibleSet::L1Ball { dim, radius } => (0..*dim)
            .flat_map(|k| {
                [1.0, -1.0].map(|s| {
                    let mut e = vec![0.0; *dim];
                    e[k] = s * radius;
                    e
                })
            })
            .collect(),
        FeasibleSet::Polytope(p) => p.vertices().rows().into_iter().map(|r| r.to_vec()).collect(),
    }
}

fn check_lmo(set: &FeasibleSet, z: &[f64]) -> Result<(), TestCaseError> {
    let v = set.lmo(z).unwrap();
    prop_assert!(set.contains(&v, 1e-12).unwrap());
    let best = vertices(set)
        .iter()
        .map(|w| dot(w, z))
        .fold(f64::INFINITY, f64::min);
    prop_assert!(dot(&v, z) <= best + 1e-12, "lmo {} vs best vertex {}", dot(&v, z), best);
    Ok(())
}

fn box_strategy(max_dim: usize) -> impl Strategy<Value = FeasibleSet> {
    prop::collection::vec((-3.0..3.0f64, 0.0..3.0f64), 1..=max_dim).prop_map(|b| {
        let lower: Vec<f64> = b.iter().map(|p| p.0).collect();
        let upper: Vec<f64> = b.iter().map(|p| p.0 + p.1).collect();
        FeasibleSet::new_box(lower, upper).unwrap()
    })
}

fn polytope_strategy(max_dim: usize) -> impl Strategy<Value = FeasibleSet> {
    (1..=max_dim, 1..=12usize)
        .prop_flat_map(|(n, m)| prop::collection::vec(-3.0..3.0f64, n * m).prop_map(move |v| (n, m, v)))
        .prop_map(|(n, m, v)| FeasibleSet::polytope(Array2::from_shape_vec((m, n), v).unwrap()).unwrap())
}

fn any_set(max_dim: usize) -> impl Strategy<Value = FeasibleSet> {
    prop_oneof![
        box_strategy(max_dim),
        (1..=max_dim, 0.1..4.0f64).prop_map(|(n, r)| FeasibleSet::simplex(n, r).unwrap()),
        (1..=max_dim, 0.1..4.0f64).prop_map(|(n, r)| FeasibleSet::l1_ball(n, r).unwrap()),
        polytope_strategy(max_dim),
    ]
}

/// A set paired with a vector of matching dimension.
fn with_vector(
    sets: impl Strategy<Value = FeasibleSet>,
    scale: f64,
) -> impl Strategy<Value = (FeasibleSet, Vec<f64>)> {
    sets.prop_flat_map(move |s| {
        let n = s.dim();
        (Just(s), prop::collection::vec(-scale..scale, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn box_lmo_beats_every_vertex((set, z) in with_vector(box_strategy(10), 5.0)) {
        check_lmo(&set, &z)?;
    }

    #[test]
    fn simplex_lmo_beats_every_vertex(
        (set, z) in with_vector((1..=10usize, 0.1..4.0f64).prop_map(|(n, r)| FeasibleSet::simplex(n, r).unwrap()), 5.0)
    ) {
        check_lmo(&set, &z)?;
    }

    #[test]
    fn l1_ball_lmo_beats_every_vertex(
        (set, z) in with_vector((1..=10usize, 0.1..4.0f64).prop_map(|(n, r)| FeasibleSet::l1_ball(n, r).unwrap()), 5.0)
    ) {
        check_lmo(&set, &z)?;
    }

    #[test]
    fn polytope_lmo_beats_every_vertex((set, z) in with_vector(polytope_strategy(10), 5.0)) {
        check_lmo(&set, &z)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_beats_random_feasible_points((set, x) in with_vector(any_set(5), 6.0)) {
        let p = set.project(&x).unwrap();
        prop_assert!(set.contains(&p, 1e-9).unwrap());
        let d = dist(&x, &p);
        for seed in 0..10_000u64 {
            let w = set.sample_point(seed);
            prop_assert!(d <= dist(&x, &w) + 1e-9, "sample {seed} is closer");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_idempotent((set, x) in with_vector(any_set(6), 6.0)) {
        let p = set.project(&x).unwrap();
        let pp = set.project(&p).unwrap();
        prop_assert!(dist(&p, &pp) <= 1e-10);
    }

    #[test]
    fn projection_is_nonexpansive(
        (set, a, b) in any_set(6).prop_flat_map(|s| {
            let n = s.dim();
            (Just(s), prop::collection::vec(-6.0..6.0f64, n), prop::collection::vec(-6.0..6.0f64, n))
        })
    ) {
        let pa = set.project(&a).unwrap();
        let pb = set.project(&b).unwrap();
        prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-10);
    }

    #[test]
    fn projection_satisfies_variational_inequality((set, x) in with_vector(any_set(6), 6.0)) {
        let p = set.project(&x).unwrap();
        let r: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
        for seed in 0..50u64 {
            let w = set.sample_point(seed);
            let d: Vec<f64> = w.iter().zip(&p).map(|(a, b)| a - b).collect();
            prop_assert!(dot(&r, &d) <= 1e-9, "inner product {}", dot(&r, &d));
        }
    }

    #[test]
    fn lmo_point_is_feasible((set, z) in with_vector(any_set(8), 5.0)) {
        let v = set.lmo(&z).unwrap();
        prop_assert!(set.contains(&v, 1e-12).unwrap());
    }
}

/// Enumerates supports: on support `S` the projection is `y_S - tau` with
/// `tau` fixed by the sum constraint.
fn simplex_projection_by_active_sets(y: &[f64], radius: f64) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1..1usize << n {
        let support: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
        let tau = (support.iter().map(|&k| y[k]).sum::<f64>() - radius) / support.len() as f64;
        let mut x = vec![0.0; n];
        for &k in &support {
            x[k] = y[k] - tau;
        }
        if x.iter().any(|&v| v < -1e-14) {
            continue;
        }
        let d = dist(y, &x);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn simplex_projection_matches_active_sets(
        y in prop::collection::vec(-4.0..4.0f64, 3),
        radius in 0.1..3.0f64,
    ) {
        let fast = project_simplex(&y, radius);
        let slow = simplex_projection_by_active_sets(&y, radius);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-10, "{fast:?} vs {slow:?}");
        }
    }
}
