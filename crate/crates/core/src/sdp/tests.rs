use super::*;
use crate::linalg::packing::{offdiag_index, unpack};

fn check_solved(sol: &ConicSolution, p: &ConicProblem, opts: &SolverOptions) {
    assert_eq!(sol.status, SolveStatus::Solved, "status {:?} after {} iterations", sol.status, sol.iterations);
    assert!(sol.primal_residual <= opts.tol_primal);
    assert!(sol.dual_residual <= opts.tol_dual);
    assert!(p.equality_residual(&sol.x) <= opts.tol_primal * 1.0001);
    for (i, blk) in p.blocks().iter().enumerate() {
        if blk.kind == BlockKind::Psd {
            let m = unpack(sol.block(i), blk.dim);
            assert!(m.min_eigenvalue().unwrap() >= -1e-6);
        }
    }
}

/// minimize trace(X) s.t. X ⪰ 0 (2×2), X(1,1) = 1.
fn trace_completion() -> (ConicProblem, f64) {
    let mut b = ProblemBuilder::new();
    let x = b.add_block(Block::psd(2));
    b.add_objective(x, 1.0);
    b.add_objective(x + 1, 1.0);
    b.add_equality(vec![(x, 1.0)], 1.0);
    (b.build().unwrap(), 1.0)
}

/// minimize t s.t. ‖(3, 4)‖ ≤ t.
fn soc_norm() -> (ConicProblem, f64) {
    let mut b = ProblemBuilder::new();
    let s = b.add_block(Block::soc(3));
    b.add_objective(s, 1.0);
    b.add_equality(vec![(s + 1, 1.0)], 3.0);
    b.add_equality(vec![(s + 2, 1.0)], 4.0);
    (b.build().unwrap(), 5.0)
}

/// minimize x1 + 3 x2 s.t. x1 + 2 x2 = 2, x ≥ 0.
fn small_lp() -> (ConicProblem, f64) {
    let mut b = ProblemBuilder::new();
    let x = b.add_block(Block::nonneg(2));
    b.add_objective(x, 1.0);
    b.add_objective(x + 1, 3.0);
    b.add_equality(vec![(x, 1.0), (x + 1, 2.0)], 2.0);
    (b.build().unwrap(), 2.0)
}

/// minimize ⟨C, X⟩ s.t. trace X = 1, X ⪰ 0: optimum λ_min(C).
fn min_eigenvalue_sdp() -> (ConicProblem, f64) {
    // C = [[2, 1+j, 0], [1-j, 3, 0], [0, 0, 4]]
    let d = 3;
    let mut b = ProblemBuilder::new();
    let x = b.add_block(Block::psd(d));
    b.add_objective(x, 2.0);
    b.add_objective(x + 1, 3.0);
    b.add_objective(x + 2, 4.0);
    let (re, im) = offdiag_index(d, 0, 1);
    let s2 = std::f64::consts::SQRT_2;
    b.add_objective(x + re, s2 * 1.0);
    b.add_objective(x + im, s2 * 1.0);
    b.add_equality((0..d).map(|i| (x + i, 1.0)).collect(), 1.0);
    // λ_min of [[2, 1+j], [1-j, 3]] = (5 - sqrt(1 + 8)) / 2 = 1.
    (b.build().unwrap(), 1.0)
}

/// minimize ‖x − a‖ s.t. Σx = 0, x free: optimum |Σa|/√n.
fn distance_to_hyperplane() -> (ConicProblem, f64) {
    let a = [1.0, 2.0, -0.5, 3.0];
    let n = a.len();
    let mut b = ProblemBuilder::new();
    let x = b.add_block(Block::free(n));
    let s = b.add_block(Block::soc(n + 1));
    b.add_objective(s, 1.0);
    for i in 0..n {
        b.add_equality(vec![(s + 1 + i, 1.0), (x + i, -1.0)], -a[i]);
    }
    b.add_equality((0..n).map(|i| (x + i, 1.0)).collect(), 0.0);
    let total: f64 = a.iter().sum();
    (b.build().unwrap(), total.abs() / (n as f64).sqrt())
}

#[test]
fn canned_problems_converge_to_known_optima() {
    let opts = SolverOptions::default();
    for (name, (p, opt)) in [
        ("trace", trace_completion()),
        ("soc", soc_norm()),
        ("lp", small_lp()),
        ("mineig", min_eigenvalue_sdp()),
        ("hyperplane", distance_to_hyperplane()),
    ] {
        let sol = solve(&p, &opts, None).unwrap();
        check_solved(&sol, &p, &opts);
        assert!(
            (sol.objective - opt).abs() <= 1e-5 * (1.0 + opt.abs()),
            "{name}: objective {} vs {opt}",
            sol.objective
        );
    }
}

#[test]
fn trace_completion_returns_e1_e1t() {
    let (p, _) = trace_completion();
    let sol = solve(&p, &SolverOptions::default(), None).unwrap();
    let x = unpack(sol.block(0), 2);
    assert!((x.get(0, 0).re - 1.0).abs() < 1e-5);
    assert!(x.get(1, 1).re.abs() < 1e-5 && x.get(0, 1).norm() < 1e-5);
}

#[test]
fn soc_problem_attains_five() {
    let (p, _) = soc_norm();
    let sol = solve(&p, &SolverOptions::default(), None).unwrap();
    assert!((sol.block(0)[0] - 5.0).abs() < 1e-5);
}

#[test]
fn warm_start_from_solution_finishes_quickly() {
    let (p, _) = min_eigenvalue_sdp();
    let opts = SolverOptions::default();
    let cold = solve(&p, &opts, None).unwrap();
    let warm = solve(&p, &opts, Some(&cold.warm)).unwrap();
    assert_eq!(warm.status, SolveStatus::Solved);
    assert!(warm.iterations <= cold.iterations);
    assert!(warm.iterations <= 2 * opts.check_every);
}

#[test]
fn infeasible_problem_is_not_reported_solved() {
    // x ≥ 0 and x = -1.
    let mut b = ProblemBuilder::new();
    let x = b.add_block(Block::nonneg(1));
    b.add_objective(x, 1.0);
    b.add_equality(vec![(x, 1.0)], -1.0);
    let p = b.build().unwrap();
    let opts = SolverOptions {
        max_iters: 2000,
        ..Default::default()
    };
    let sol = solve(&p, &opts, None).unwrap();
    assert_ne!(sol.status, SolveStatus::Solved);
}

#[test]
fn malformed_problems_are_rejected() {
    use nalgebra::{DMatrix, DVector};
    let err = ConicProblem::new(vec![Block::free(2)], DVector::zeros(3), DMatrix::zeros(0, 2), DVector::zeros(0));
    assert!(err.is_err());
    let err = ConicProblem::new(vec![Block::psd(0)], DVector::zeros(0), DMatrix::zeros(0, 0), DVector::zeros(0));
    assert!(err.is_err());
    let bad = SolverOptions {
        relaxation: 2.5,
        ..Default::default()
    };
    let (p, _) = soc_norm();
    assert!(solve(&p, &bad, None).is_err());
}
