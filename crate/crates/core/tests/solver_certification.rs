mod common;

use common::{fd_gradient, planted_program, random_canonical, rel_diff, rng};
use wsee::solver::{solve, SolveStatus, SolverOptions};

#[test]
fn canonical_gradients_match_finite_differences() {
    let mut r = rng(11);
    for _ in 0..200 {
        let n = rand::Rng::random_range(&mut r, 1..=6);
        let f = random_canonical(&mut r, n);
        let x: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, -2.0..2.0)).collect();
        let ev = f.evaluate(&x);
        let fd = fd_gradient(|y| f.value(y), &x, 1e-5);
        assert!(rel_diff(&ev.gradient, &fd, 1.0) <= 1e-6, "gradient mismatch");
        for k in 0..n {
            let col: Vec<f64> = (0..n).map(|j| ev.hessian[(j, k)]).collect();
            let fd_col = fd_gradient(|y| f.gradient(y)[k], &x, 1e-5);
            assert!(rel_diff(&col, &fd_col, 1.0) <= 1e-6, "hessian mismatch");
        }
    }
}

#[test]
fn planted_optima_are_recovered() {
    let mut r = rng(5);
    for case in 0..100 {
        let pl = planted_program(&mut r);
        let rep = solve(&pl.program, &vec![0.0; pl.program.n_vars], &SolverOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal, "case {case}: {:?}", pl.program);
        let err = (rep.objective - pl.value).abs() / pl.value.abs().max(1.0);
        assert!(err <= 1e-6, "case {case}: {} vs {}", rep.objective, pl.value);
        for g in &pl.program.constraints {
            assert!(g.value(&rep.x) >= -1e-9);
        }
    }
}
