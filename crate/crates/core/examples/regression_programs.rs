//! Writes the conic program regression set to `tests/fixtures/programs/`.
//!
//! Run with `cargo run -p opfrelax --example regression_programs`, then
//! refresh the reference optima with `scripts/reference_optima.py`.

#[path = "../tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::PathBuf;

use opfrelax::{build, load_case, Objective, OpfModel, Plane, ProjectionSpec, Relaxation};
use opfrelax_conic::{ConeBlock, ConicProgram, SparseMatrix};

fn program(
    c: Vec<f64>,
    eq: (usize, &[(usize, usize, f64)], Vec<f64>),
    cone: (&[(usize, usize, f64)], Vec<f64>),
    cones: Vec<ConeBlock>,
) -> ConicProgram {
    let n = c.len();
    ConicProgram {
        num_vars: n,
        objective: c,
        objective_offset: 0.0,
        eq_matrix: SparseMatrix::from_triplets(eq.0, n, eq.1).unwrap(),
        eq_rhs: eq.2,
        cone_matrix: SparseMatrix::from_triplets(cone.1.len(), n, cone.0).unwrap(),
        cone_rhs: cone.1,
        cones,
        labels: Vec::new(),
    }
}

/// Small programs exercising each cone type directly.
fn solver_examples() -> Vec<(String, ConicProgram)> {
    let s2 = std::f64::consts::SQRT_2;
    vec![
        // min x0 + 2 x1  s.t. x0 + x1 = 1, 0 ≤ x ≤ 0.8
        (
            "lp_box".into(),
            program(
                vec![1.0, 2.0],
                (1, &[(0, 0, 1.0), (0, 1, 1.0)], vec![1.0]),
                (&[(0, 0, -1.0), (1, 1, -1.0), (2, 0, 1.0), (3, 1, 1.0)], vec![0.0, 0.0, 0.8, 0.8]),
                vec![ConeBlock::Nonneg { dim: 4 }],
            ),
        ),
        // min x0 − x1 + 0.5 x2  s.t. ‖x‖ ≤ 1
        (
            "soc_ball".into(),
            program(
                vec![1.0, -1.0, 0.5],
                (0, &[], vec![]),
                (&[(1, 0, -1.0), (2, 1, -1.0), (3, 2, -1.0)], vec![1.0, 0.0, 0.0, 0.0]),
                vec![ConeBlock::SecondOrder { dim: 4 }],
            ),
        ),
        // min a + b  s.t. 2ab ≥ 1 + 4, written as (a, b, 1, 2) ∈ RSOC
        (
            "rsoc_hyperbolic".into(),
            program(
                vec![1.0, 1.0],
                (0, &[], vec![]),
                (&[(0, 0, -1.0), (1, 1, -1.0)], vec![0.0, 0.0, 1.0, 2.0]),
                vec![ConeBlock::RotatedSecondOrder { dim: 4 }],
            ),
        ),
        // max t  s.t. M − t I ⪰ 0 for a fixed symmetric M
        (
            "psd_min_eig".into(),
            program(
                vec![-1.0],
                (0, &[], vec![]),
                (&[(0, 0, 1.0), (2, 0, 1.0), (5, 0, 1.0)], vec![2.0, 0.5 * s2, 1.0, -0.3 * s2, 0.2 * s2, 3.0]),
                vec![ConeBlock::PsdReal { order: 3 }],
            ),
        ),
        // every cone type at once
        (
            "mixed_cones".into(),
            program(
                vec![1.0, 1.0, -1.0, 0.0],
                (1, &[(0, 3, 1.0)], vec![0.5]),
                (
                    &[
                        (0, 0, -1.0),
                        (1, 1, -1.0),
                        (3, 2, -1.0),
                        (4, 0, -1.0),
                        (5, 1, -1.0),
                        (6, 3, -1.0),
                        (7, 0, -1.0),
                        (8, 2, -s2),
                        (9, 1, -1.0),
                    ],
                    vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                ),
                vec![
                    ConeBlock::Nonneg { dim: 2 },
                    ConeBlock::SecondOrder { dim: 2 },
                    ConeBlock::RotatedSecondOrder { dim: 3 },
                    ConeBlock::PsdReal { order: 2 },
                ],
            ),
        ),
    ]
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/programs");
    fs::create_dir_all(&dir)?;
    let mut out: Vec<(String, ConicProgram)> = Vec::new();

    let cases: [(&str, &[Relaxation]); 3] = [
        ("case9", &Relaxation::ALL),
        ("case14", &[Relaxation::R1, Relaxation::Rch, Relaxation::R2]),
        ("case30", &[Relaxation::Rch, Relaxation::R2, Relaxation::Bf]),
    ];
    for (name, rs) in cases {
        let (net, cost) = load_case(name)?;
        let model = OpfModel::new(net, cost);
        for &r in rs {
            out.push((format!("{name}_{r}"), build(&model, r)?.program));
        }
    }

    let (net, _) = load_case("table1")?;
    let spec = ProjectionSpec::table1(Plane::P1P2);
    for i in [0, 5, 10] {
        let (dx, dy) = spec.direction(i);
        let mut p = vec![0.0; 3];
        p[0] = -dx;
        p[1] = -dy;
        let model = OpfModel::new(net.clone(), opfrelax::CostSpec::loss_min())
            .with_pins(spec.pins.clone())
            .with_objective(Objective::Injections { p, q: vec![0.0; 3] });
        for r in [Relaxation::R1, Relaxation::R2] {
            out.push((format!("table1_{r}_d{i}"), build(&model, r)?.program));
        }
    }

    let mut rng = common::rng(20_240_611);
    let mesh = common::random_case(&mut rng, 8, false);
    let tree = common::random_case(&mut rng, 10, true);
    for (tag, case, rs) in [
        ("mesh8", &mesh, vec![Relaxation::R1, Relaxation::R2, Relaxation::Bf]),
        ("tree10", &tree, vec![Relaxation::Rch, Relaxation::Bf]),
    ] {
        let model = OpfModel::new(case.network.clone(), case.cost.clone());
        for r in rs {
            out.push((format!("random_{tag}_{r}"), build(&model, r)?.program));
        }
    }

    out.extend(solver_examples());
    for (name, prog) in &out {
        prog.validate()?;
        fs::write(dir.join(format!("{name}.json")), prog.to_json())?;
    }
    println!("wrote {} programs to {}", out.len(), dir.display());
    Ok(())
}
