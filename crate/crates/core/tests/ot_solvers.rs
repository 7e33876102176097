mod common;

use common::{assignment_min, rng, uniform_matrix};
use geocot::ot::{
    brute_force_oracle, marginal_violation, solve_exact, solve_sinkhorn, transport_cost, CostMatrix,
    DiscreteMeasure, ExactSolver, ScalingDomain, SinkhornParams,
};
use geocot::Error;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn cost_strategy(max_n: usize) -> impl Strategy<Value = Array2<f64>> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..10.0, n * n)
            .prop_map(move |v| Array2::from_shape_vec((n, n), v).expect("square"))
    })
}

fn simplex(n: usize) -> impl Strategy<Value = Array1<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        Array1::from(v) / s
    })
}

proptest! {
    #![proptest_config(common::cases(64))]

    #[test]
    fn exact_matches_naive_assignment(c in cost_strategy(6)) {
        let n = c.nrows();
        let cost = CostMatrix::new(c.clone()).unwrap();
        let u = DiscreteMeasure::uniform(n);
        let plan = solve_exact(&cost, &u, &u).unwrap();
        let obj = transport_cost(&plan, &cost).unwrap();
        prop_assert!((obj - assignment_min(&c)).abs() <= 1e-9);
        prop_assert!((obj - brute_force_oracle(&cost).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn exact_is_permutation_equivariant(c in cost_strategy(6), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = c.nrows();
        let mut r = rng(seed);
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut r);
        cols.shuffle(&mut r);
        let permuted = Array2::from_shape_fn((n, n), |(i, j)| c[[rows[i], cols[j]]]);
        let u = DiscreteMeasure::uniform(n);
        let a = CostMatrix::new(c).unwrap();
        let b = CostMatrix::new(permuted).unwrap();
        let oa = transport_cost(&solve_exact(&a, &u, &u).unwrap(), &a).unwrap();
        let ob = transport_cost(&solve_exact(&b, &u, &u).unwrap(), &b).unwrap();
        prop_assert!((oa - ob).abs() <= 1e-9);
    }

    #[test]
    fn exact_plan_is_feasible_for_general_marginals(
        (c, mu, nu) in (2usize..8, 2usize..8).prop_flat_map(|(n, m)| (
            prop::collection::vec(0.0f64..5.0, n * m).prop_map(move |v| Array2::from_shape_vec((n, m), v).unwrap()),
            simplex(n),
            simplex(m),
        ))
    ) {
        let cost = CostMatrix::new(c).unwrap();
        let mu = DiscreteMeasure::normalized(mu).unwrap();
        let nu = DiscreteMeasure::normalized(nu).unwrap();
        let plan = solve_exact(&cost, &mu, &nu).unwrap();
        prop_assert!(marginal_violation(&plan) <= 1e-12);
        prop_assert!(plan.entries().iter().all(|&x| x >= 0.0));
        // A vertex solution has at most n + m - 1 positive entries.
        let support = plan.entries().iter().filter(|&&x| x > 1e-15).count();
        prop_assert!(support < mu.len() + nu.len());
    }

    #[test]
    fn sinkhorn_upper_bounds_exact(c in cost_strategy(7), reg in 0.01f64..1.0) {
        let n = c.nrows();
        let cost = CostMatrix::new(c).unwrap();
        let u = DiscreteMeasure::uniform(n);
        let exact = transport_cost(&solve_exact(&cost, &u, &u).unwrap(), &cost).unwrap();
        let sol = solve_sinkhorn(&cost, &u, &u, reg, 1_000_000, 1e-6).unwrap();
        prop_assert!(sol.violation <= 1e-6);
        // Marginal slack can lower the objective by at most n·1e-6·max C.
        prop_assert!(transport_cost(&sol.plan, &cost).unwrap() >= exact - 1e-4);
    }
}

#[test]
fn plain_and_log_domains_agree() {
    let mut r = rng(2);
    let cost = CostMatrix::new(uniform_matrix(&mut r, 9, 7)).unwrap();
    let mu = DiscreteMeasure::uniform(9);
    let nu = DiscreteMeasure::uniform(7);
    let solve = |domain| {
        SinkhornParams {
            domain,
            ..SinkhornParams::new(0.2, 10_000, 1e-13)
        }
        .solve(&cost, &mu, &nu)
        .unwrap()
    };
    let plain = solve(ScalingDomain::Plain);
    let log = solve(ScalingDomain::Log);
    assert!(!plain.log_domain && log.log_domain);
    let diff = (&plain.plan.entries() - &log.plan.entries()).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
    assert!(diff <= 1e-10, "{diff}");
}

#[test]
fn sinkhorn_approaches_exact_as_reg_shrinks() {
    let mut r = rng(9);
    let cost = CostMatrix::new(uniform_matrix(&mut r, 6, 6)).unwrap();
    let u = DiscreteMeasure::uniform(6);
    let exact = transport_cost(&solve_exact(&cost, &u, &u).unwrap(), &cost).unwrap();
    let mut last = f64::INFINITY;
    for reg in [1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001] {
        let sol = solve_sinkhorn(&cost, &u, &u, reg, 1_000_000, 1e-6).unwrap();
        let gap = transport_cost(&sol.plan, &cost).unwrap() - exact;
        assert!(gap >= -1e-5 && gap <= last + 1e-5, "reg {reg}: gap {gap} after {last}");
        last = gap;
    }
    assert!(last <= 1e-3);
}

#[test]
fn zero_weight_support_is_respected() {
    let mut r = rng(4);
    let cost = CostMatrix::new(uniform_matrix(&mut r, 4, 3)).unwrap();
    let mu = DiscreteMeasure::new(Array1::from(vec![0.5, 0.0, 0.25, 0.25])).unwrap();
    let nu = DiscreteMeasure::uniform(3);
    for plan in [
        solve_exact(&cost, &mu, &nu).unwrap(),
        solve_sinkhorn(&cost, &mu, &nu, 0.1, 10_000, 1e-12).unwrap().plan,
    ] {
        assert!(plan.entries().row(1).iter().all(|&x| x == 0.0));
        assert!(marginal_violation(&plan) <= 1e-10);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(
        DiscreteMeasure::new(Array1::from(vec![0.5, 0.6])),
        Err(Error::InvalidMeasure(_))
    ));
    assert!(matches!(
        DiscreteMeasure::new(Array1::from(vec![1.5, -0.5])),
        Err(Error::InvalidMeasure(_))
    ));
    assert!(matches!(
        CostMatrix::new(Array2::from_elem((2, 2), f64::NAN)),
        Err(Error::InvalidCost(_))
    ));
    let cost = CostMatrix::new(Array2::zeros((3, 3))).unwrap();
    assert!(matches!(
        solve_exact(&cost, &DiscreteMeasure::uniform(2), &DiscreteMeasure::uniform(3)),
        Err(Error::DimensionMismatch(_))
    ));
    let capped = ExactSolver {
        max_rows: 2,
        max_cols: 2,
        ..ExactSolver::default()
    };
    let u = DiscreteMeasure::uniform(3);
    assert!(matches!(capped.solve(&cost, &u, &u), Err(Error::SolverCapExceeded { .. })));
    assert!(matches!(
        solve_sinkhorn(&cost, &u, &u, 0.0, 10, 1e-9),
        Err(Error::InvalidParameter(_))
    ));
}
