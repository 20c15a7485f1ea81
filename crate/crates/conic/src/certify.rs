//! Independent a-posteriori check of an optimal solution.

use serde::{Deserialize, Serialize};

use crate::cones::{min_eigenvalue, norm, smat};
use crate::error::ConicError;
use crate::program::{ConeBlock, ConicProgram};
use crate::solver::{ConicSolution, SolveStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `‖Ax − b‖ / max(1, ‖b‖)`
    pub equality_residual: f64,
    /// Most negative Jordan eigenvalue of `h − Gx`, relative to `max(1, ‖h‖)`; zero if inside.
    pub primal_cone_violation: f64,
    /// `‖A'y + G'z + c‖ / max(1, ‖c‖)`
    pub dual_residual: f64,
    /// Most negative Jordan eigenvalue of `z`; zero if inside.
    pub dual_cone_violation: f64,
    /// `|c'x + b'y + h'z| / max(1, |c'x + c₀|)`
    pub gap: f64,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Smallest Jordan eigenvalue of a vector with respect to one cone block.
fn block_min_eig(block: &ConeBlock, v: &[f64]) -> f64 {
    match *block {
        ConeBlock::Nonneg { .. } => v.iter().copied().fold(f64::INFINITY, f64::min),
        ConeBlock::SecondOrder { .. } => v[0] - norm(&v[1..]),
        ConeBlock::RotatedSecondOrder { .. } => {
            let r2 = std::f64::consts::FRAC_1_SQRT_2;
            (v[0] + v[1]) * r2 - ((v[0] - v[1]) * (v[0] - v[1]) / 2.0 + norm(&v[2..]).powi(2)).sqrt()
        }
        ConeBlock::PsdReal { order } => min_eigenvalue(smat(v, order)),
    }
}

fn cone_violation(prog: &ConicProgram, v: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (block, off) in prog.cones.iter().zip(prog.cone_offsets()) {
        let e = block_min_eig(block, &v[off..off + block.dim()]);
        worst = worst.max(-e);
    }
    worst
}

/// Recomputes residuals and cone membership of `sol` from the program data alone.
pub fn certify(
    prog: &ConicProgram,
    sol: &ConicSolution,
    tol: f64,
) -> Result<CertificateReport, ConicError> {
    if sol.status != SolveStatus::Optimal {
        return Err(ConicError::NothingToCertify(sol.status.to_string()));
    }
    let n = prog.num_vars;
    let m = prog.cone_rhs.len();
    let p = prog.eq_rhs.len();
    if sol.x.len() != n || sol.z.len() != m || sol.y.len() != p {
        return Err(ConicError::Malformed("solution does not match program shape".into()));
    }
    let mut ax = vec![0.0; p];
    prog.eq_matrix.mul_add(1.0, &sol.x, &mut ax);
    for (r, b) in ax.iter_mut().zip(&prog.eq_rhs) {
        *r -= b;
    }
    let equality_residual = norm(&ax) / norm(&prog.eq_rhs).max(1.0);

    let mut slack = prog.cone_rhs.clone();
    prog.cone_matrix.mul_add(-1.0, &sol.x, &mut slack);
    let primal_cone_violation = cone_violation(prog, &slack) / norm(&prog.cone_rhs).max(1.0);

    let mut rd = prog.objective.clone();
    prog.eq_matrix.mul_t_add(1.0, &sol.y, &mut rd);
    prog.cone_matrix.mul_t_add(1.0, &sol.z, &mut rd);
    let dual_residual = norm(&rd) / norm(&prog.objective).max(1.0);
    let dual_cone_violation = cone_violation(prog, &sol.z);

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let cx = dot(&prog.objective, &sol.x);
    let raw_gap = cx + dot(&prog.eq_rhs, &sol.y) + dot(&prog.cone_rhs, &sol.z);
    let gap = raw_gap.abs() / (cx + prog.objective_offset).abs().max(1.0);

    let worst = [
        equality_residual,
        primal_cone_violation,
        dual_residual,
        dual_cone_violation,
        gap,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(CertificateReport {
        equality_residual,
        primal_cone_violation,
        dual_residual,
        dual_cone_violation,
        gap,
        worst,
        tolerance: tol,
        passed: worst <= tol,
    })
}
