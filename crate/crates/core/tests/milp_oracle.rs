//! LP and MILP engine checked against enumeration oracles.

mod support;

use hems_core::milp::{solve_lp, solve_milp, LpOptions, MilpModel, MilpOptions, Sense, SolveStatus, VarKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{milp_by_enumeration, random_lp, random_milp, vertex_enumeration};

#[test]
fn random_six_by_four_lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(6_4);
    let mut checked = 0;
    while checked < 20 {
        let lp = random_lp(&mut rng, 6, 4);
        if lp.cost.len() != 6 || lp.rows.len() != 4 {
            continue;
        }
        checked += 1;
        let s = solve_lp(&lp.to_model(), &LpOptions::default());
        match vertex_enumeration(&lp) {
            Some(obj) => {
                assert_eq!(s.status, SolveStatus::Optimal);
                assert!((s.objective - obj).abs() <= 1e-6, "{} vs {obj}", s.objective);
            }
            None => assert_eq!(s.status, SolveStatus::Infeasible),
        }
    }
}

#[test]
fn knapsack_matches_exhaustive_enumeration() {
    let weights = [12.0, 7.0, 11.0, 8.0, 9.0, 6.0, 14.0, 5.0];
    let values = [24.0, 13.0, 23.0, 15.0, 16.0, 11.0, 27.0, 9.0];
    let capacity = 37.0;

    let mut best = 0.0f64;
    for mask in 0u32..256 {
        let (w, v) = (0..8).filter(|i| mask >> i & 1 == 1).fold((0.0, 0.0), |(w, v), i| {
            (w + weights[i], v + values[i])
        });
        if w <= capacity {
            best = best.max(v);
        }
    }

    let mut m = MilpModel::new();
    let vars: Vec<_> = (0..8)
        .map(|i| m.add_variable(VarKind::Binary, 0.0, 1.0, format!("item{i}")).unwrap())
        .collect();
    m.add_constraint(
        vars.iter().zip(weights).map(|(&v, w)| (v, w)).collect(),
        Sense::Le,
        capacity,
        "capacity",
    )
    .unwrap();
    for (&v, p) in vars.iter().zip(values) {
        m.add_objective_term(v, -p).unwrap();
    }
    let s = solve_milp(&m, &MilpOptions::default());
    assert_eq!(s.status, SolveStatus::Optimal);
    assert_eq!(-s.objective, best);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn milp_equals_enumeration(seed in any::<u64>(), binaries in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_milp(&mut rng, binaries);
        let s = solve_milp(&model, &MilpOptions::default());
        match milp_by_enumeration(&model) {
            Some(obj) => {
                prop_assert_eq!(s.status, SolveStatus::Optimal);
                prop_assert!((s.objective - obj).abs() <= 1e-6, "{} vs {}", s.objective, obj);
                for b in model.binaries() {
                    let v = s.value(b);
                    prop_assert!((v - v.round()).abs() <= 1e-6);
                }
                prop_assert!(model.violations(&s.values, 1e-6).is_empty());
            }
            None => prop_assert_eq!(s.status, SolveStatus::Infeasible),
        }
    }

    #[test]
    fn relaxation_bounds_milp_from_below(seed in any::<u64>(), binaries in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_milp(&mut rng, binaries);
        let ip = solve_milp(&model, &MilpOptions::default());
        let lp = solve_lp(&model, &LpOptions::default());
        if ip.status == SolveStatus::Optimal {
            prop_assert_eq!(lp.status, SolveStatus::Optimal);
            prop_assert!(lp.objective <= ip.objective + 1e-9);
        }
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>(), binaries in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_milp(&mut rng, binaries);
        let a = solve_milp(&model, &MilpOptions::default());
        let b = solve_milp(&model, &MilpOptions::default());
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        prop_assert_eq!(
            a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    /// No feasible point on a segment towards a random feasible vertex improves
    /// on the returned optimum.
    #[test]
    fn lp_optimum_survives_perturbation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, 8, 6);
        let model = lp.to_model();
        let s = solve_lp(&model, &LpOptions::default());
        if s.status == SolveStatus::Optimal {
            prop_assert!(lp.is_feasible(&s.values, 1e-7));
            let mut other = lp.clone();
            other.cost = other.cost.iter().map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
            let t = solve_lp(&other.to_model(), &LpOptions::default());
            prop_assert_eq!(t.status, SolveStatus::Optimal);
            for step in [1e-3, 0.1, 0.5, 1.0] {
                let x: Vec<f64> = s.values.iter().zip(&t.values).map(|(a, b)| a + step * (b - a)).collect();
                let obj: f64 = lp.cost.iter().zip(&x).map(|(c, x)| c * x).sum();
                prop_assert!(obj >= s.objective - 1e-7);
            }
        }
    }
}
