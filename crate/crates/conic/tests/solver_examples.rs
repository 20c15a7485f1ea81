use opfrelax_conic::{
    certify, solve, svec_index, ConeBlock, ConicError, ConicProgram, SolveStatus, SolverSettings,
    SparseMatrix,
};
use proptest::prelude::*;

fn program(
    n: usize,
    c: Vec<f64>,
    a: &[(usize, usize, f64)],
    b: Vec<f64>,
    g: &[(usize, usize, f64)],
    h: Vec<f64>,
    cones: Vec<ConeBlock>,
) -> ConicProgram {
    ConicProgram {
        num_vars: n,
        objective: c,
        objective_offset: 0.0,
        eq_matrix: SparseMatrix::from_triplets(b.len(), n, a).unwrap(),
        eq_rhs: b,
        cone_matrix: SparseMatrix::from_triplets(h.len(), n, g).unwrap(),
        cone_rhs: h,
        cones,
        labels: vec![],
    }
}

fn nonneg_example() -> ConicProgram {
    // minimize x  s.t. x − 1 ≥ 0
    program(1, vec![1.0], &[], vec![], &[(0, 0, -1.0)], vec![-1.0], vec![ConeBlock::Nonneg { dim: 1 }])
}

fn psd_example() -> ConicProgram {
    // variables (W11, W12, W22); minimize tr W  s.t. W ⪰ 0, W11 = 1, W12 = 2
    let s2 = std::f64::consts::SQRT_2;
    program(
        3,
        vec![1.0, 0.0, 1.0],
        &[(0, 0, 1.0), (1, 1, 1.0)],
        vec![1.0, 2.0],
        &[
            (svec_index(0, 0), 0, -1.0),
            (svec_index(0, 1), 1, -s2),
            (svec_index(1, 1), 2, -1.0),
        ],
        vec![0.0; 3],
        vec![ConeBlock::PsdReal { order: 2 }],
    )
}

#[test]
fn nonnegative_lower_bound() {
    let sol = solve(&nonneg_example(), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-7, "{}", sol.objective);
}

#[test]
fn second_order_norm() {
    let prog = program(
        1,
        vec![1.0],
        &[],
        vec![],
        &[(0, 0, -1.0)],
        vec![0.0, 3.0, 4.0],
        vec![ConeBlock::SecondOrder { dim: 3 }],
    );
    let sol = solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - 5.0).abs() < 1e-7, "{}", sol.objective);
}

#[test]
fn psd_boundary_forces_rank_one() {
    let sol = solve(&psd_example(), &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    // W22 ≥ W12² / W11 = 4
    assert!((sol.objective - 5.0).abs() < 1e-6, "{}", sol.objective);
    assert!((sol.x[2] - 4.0).abs() < 1e-6);
}

#[test]
fn optimal_solutions_certify() {
    let st = SolverSettings::default();
    for prog in [nonneg_example(), psd_example()] {
        let sol = solve(&prog, &st).unwrap();
        let report = certify(&prog, &sol, 10.0 * st.tol_gap).unwrap();
        assert!(report.passed, "{report:?}");
    }
}

#[test]
fn perturbed_solution_fails_certification() {
    let st = SolverSettings::default();
    let prog = psd_example();
    let mut sol = solve(&prog, &st).unwrap();
    sol.x[0] += 1e-3;
    let report = certify(&prog, &sol, 10.0 * st.tol_gap).unwrap();
    assert!(!report.passed);
    assert!(report.worst >= 1e-4);
}

#[test]
fn infeasible_status_has_nothing_to_certify() {
    let prog = program(
        1,
        vec![1.0],
        &[],
        vec![],
        &[(0, 0, -1.0), (1, 0, 1.0)],
        vec![-2.0, 1.0],
        vec![ConeBlock::Nonneg { dim: 2 }],
    );
    let sol = solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    let err = certify(&prog, &sol, 1e-7).unwrap_err();
    assert!(matches!(err, ConicError::NothingToCertify(_)));
    assert!(err.to_string().contains("nothing to certify"));
}

#[test]
fn iteration_limit_reported() {
    let st = SolverSettings { max_iters: 1, ..Default::default() };
    let sol = solve(&psd_example(), &st).unwrap();
    assert_eq!(sol.status, SolveStatus::IterLimit);
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let prog = psd_example();
    let a = solve(&prog, &SolverSettings::default()).unwrap();
    let b = solve(&prog, &SolverSettings::default()).unwrap();
    assert_eq!(a, b);
}

/// min cᵀx over the box 0 ≤ x ≤ u equals Σ min(0, c_i) u_i.
fn box_program(c: &[f64], u: &[f64]) -> ConicProgram {
    let n = c.len();
    let mut g = Vec::new();
    let mut h = Vec::new();
    for i in 0..n {
        g.push((2 * i, i, -1.0));
        h.push(0.0);
        g.push((2 * i + 1, i, 1.0));
        h.push(u[i]);
    }
    program(n, c.to_vec(), &[], vec![], &g, h, vec![ConeBlock::Nonneg { dim: 2 * n }])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn box_lp_matches_closed_form(
        data in prop::collection::vec((-5.0f64..5.0, 0.1f64..4.0), 1..8)
    ) {
        let c: Vec<f64> = data.iter().map(|d| d.0).collect();
        let u: Vec<f64> = data.iter().map(|d| d.1).collect();
        let expect: f64 = c.iter().zip(&u).map(|(ci, ui)| ci.min(0.0) * ui).sum();
        let sol = solve(&box_program(&c, &u), &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!((sol.objective - expect).abs() <= 1e-6 * expect.abs().max(1.0));
        prop_assert!(sol.objective >= sol.dual_objective - 1e-6 * expect.abs().max(1.0));
    }

    /// minimize t s.t. ‖u − a‖ ≤ t  gives zero; minimize ⟨c, u⟩ over the unit ball gives −‖c‖.
    #[test]
    fn unit_ball_linear_objective(c in prop::collection::vec(-3.0f64..3.0, 2..6)) {
        let k = c.len();
        let cn: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(cn > 1e-3);
        let mut g = Vec::new();
        for i in 0..k {
            g.push((i + 1, i, -1.0));
        }
        let mut h = vec![0.0; k + 1];
        h[0] = 1.0;
        let prog = program(k, c.clone(), &[], vec![], &g, h, vec![ConeBlock::SecondOrder { dim: k + 1 }]);
        let sol = solve(&prog, &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!((sol.objective + cn).abs() < 1e-7 * cn.max(1.0));
    }

    /// Smallest eigenvalue as an SDP: maximize t s.t. M − tI ⪰ 0.
    #[test]
    fn min_eigenvalue_sdp(entries in prop::collection::vec(-2.0f64..2.0, 6)) {
        let s2 = std::f64::consts::SQRT_2;
        let p = 3;
        let mut m = nalgebra::DMatrix::zeros(p, p);
        let mut k = 0;
        for j in 0..p {
            for i in 0..=j {
                m[(i, j)] = entries[k];
                m[(j, i)] = entries[k];
                k += 1;
            }
        }
        let lmin = m.clone().symmetric_eigenvalues().min();
        let mut h = vec![0.0; 6];
        for j in 0..p {
            for i in 0..=j {
                h[svec_index(i, j)] = if i == j { m[(i, i)] } else { s2 * m[(i, j)] };
            }
        }
        let g: Vec<_> = (0..p).map(|i| (svec_index(i, i), 0, 1.0)).collect();
        let prog = program(1, vec![-1.0], &[], vec![], &g, h, vec![ConeBlock::PsdReal { order: 3 }]);
        let sol = solve(&prog, &SolverSettings::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!((sol.x[0] - lmin).abs() < 1e-6, "{} vs {}", sol.x[0], lmin);
    }
}
