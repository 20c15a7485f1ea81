//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling and
//! a Mehrotra predictor–corrector.
//!
//! The embedding solved at each iterate is
//!
//! ```text
//! A'y + G'z + c τ = 0
//! A x        − b τ = 0
//! G x + s    − h τ = 0
//! κ + c'x + b'y + h'z = 0,     s, z ∈ K,  τ, κ ≥ 0
//! ```
//!
//! whose dual reads `maximize −b'y − h'z s.t. A'y + G'z + c = 0, z ∈ K`.

use serde::{Deserialize, Serialize};

use crate::cones::{dot, norm, Cone, Kind, Op, Scaling};
use crate::error::ConicError;
use crate::kkt::{apply_blocks, KktStructure};
use crate::program::{ConeBlock, ConicProgram, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iters: 200,
            step_fraction: 0.99,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), ConicError> {
        if !(self.tol_gap > 0.0 && self.tol_feas > 0.0) {
            return Err(ConicError::Malformed("tolerances must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(ConicError::Malformed("step_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterLimit,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::PrimalInfeasible => "primal_infeasible",
            SolveStatus::DualInfeasible => "dual_infeasible",
            SolveStatus::IterLimit => "iter_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    /// Relative primal infeasibility.
    pub primal: f64,
    /// Relative dual infeasibility.
    pub dual: f64,
    /// Relative duality gap.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationInfo {
    pub iter: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub tau: f64,
    pub kappa: f64,
    pub step: f64,
}

/// Result of [`solve`]. For non-optimal statuses the vectors hold the last
/// iterate (or the infeasibility certificate, normalized to unit scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers of `A x = b`.
    pub y: Vec<f64>,
    /// Multipliers of `h − G x ∈ K`.
    pub z: Vec<f64>,
    /// Cone slack `h − G x`.
    pub s: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub log: Vec<IterationInfo>,
}

impl ConicSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialization cannot fail")
    }
}

/// Rotated blocks `(a, b, u)` become `((a+b)/√2, (a−b)/√2, u)`; the map is a
/// symmetric involution so it also carries duals back.
fn rotate_rows(v: &mut [f64], offset: usize) {
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = (v[offset], v[offset + 1]);
    v[offset] = (a + b) * r2;
    v[offset + 1] = (a - b) * r2;
}

struct Internal {
    g: SparseMatrix,
    h: Vec<f64>,
    cones: Vec<Cone>,
    rotated: Vec<usize>,
}

fn to_internal(prog: &ConicProgram) -> Internal {
    let offsets = prog.cone_offsets();
    let mut cones = Vec::with_capacity(prog.cones.len());
    let mut rotated = Vec::new();
    for (block, &offset) in prog.cones.iter().zip(&offsets) {
        let (kind, dim) = match *block {
            ConeBlock::Nonneg { dim } => (Kind::Nonneg, dim),
            ConeBlock::SecondOrder { dim } => (Kind::Soc, dim),
            ConeBlock::RotatedSecondOrder { dim } => {
                rotated.push(offset);
                (Kind::Soc, dim)
            }
            ConeBlock::PsdReal { order } => (Kind::Psd(order), block.dim()),
        };
        cones.push(Cone { kind, offset, dim });
    }
    let mut h = prog.cone_rhs.clone();
    for &o in &rotated {
        rotate_rows(&mut h, o);
    }
    let g = if rotated.is_empty() {
        prog.cone_matrix.clone()
    } else {
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut first = vec![false; prog.cone_rhs.len()];
        let mut second = vec![false; prog.cone_rhs.len()];
        for &o in &rotated {
            first[o] = true;
            second[o + 1] = true;
        }
        let mut trip = Vec::with_capacity(prog.cone_matrix.nnz() * 2);
        for (r, c, v) in prog.cone_matrix.triplets() {
            if first[r] {
                trip.push((r, c, v * r2));
                trip.push((r + 1, c, v * r2));
            } else if second[r] {
                trip.push((r - 1, c, v * r2));
                trip.push((r, c, -v * r2));
            } else {
                trip.push((r, c, v));
            }
        }
        SparseMatrix::from_triplets(prog.cone_rhs.len(), prog.num_vars, &trip)
            .expect("rotation preserves shape")
    };
    Internal { g, h, cones, rotated }
}

fn combine(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Solves the cone program.
///
/// Returns an error only for malformed input; solver trouble is reported
/// through [`ConicSolution::status`].
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Result<ConicSolution, ConicError> {
    prog.validate()?;
    settings.validate()?;
    let internal = to_internal(prog);
    // objective scaling keeps τ and the dual iterate of moderate size
    let gamma = prog.objective.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut sol = if gamma > 1.0 {
        let scaled = ConicProgram {
            objective: prog.objective.iter().map(|v| v / gamma).collect(),
            objective_offset: prog.objective_offset / gamma,
            ..prog.clone()
        };
        let mut sol = run(&scaled, &internal, settings);
        sol.objective *= gamma;
        sol.dual_objective *= gamma;
        for it in &mut sol.log {
            it.primal_objective *= gamma;
            it.dual_objective *= gamma;
        }
        if !matches!(sol.status, SolveStatus::PrimalInfeasible | SolveStatus::DualInfeasible) {
            sol.y.iter_mut().chain(sol.z.iter_mut()).for_each(|v| *v *= gamma);
        }
        sol
    } else {
        run(prog, &internal, settings)
    };
    for &o in &internal.rotated {
        rotate_rows(&mut sol.z, o);
        rotate_rows(&mut sol.s, o);
    }
    Ok(sol)
}

fn run(prog: &ConicProgram, int: &Internal, st: &SolverSettings) -> ConicSolution {
    let n = prog.num_vars;
    let p = prog.eq_rhs.len();
    let m = int.h.len();
    let c = &prog.objective;
    let b = &prog.eq_rhs;
    let h = &int.h;
    let cones = &int.cones;
    let kkt = KktStructure::new(n, int.g.clone(), prog.eq_matrix.clone(), cones.clone());
    let g = kkt.g();
    let a = kkt.a();
    let degree: usize = cones.iter().map(Cone::degree).sum();

    let norm_c = norm(c).max(1.0);
    let norm_b = norm(b).max(1.0);
    let norm_h = norm(h).max(1.0);

    let mut x = vec![0.0; n];
    let mut y = vec![0.0; p];
    let mut s = vec![0.0; m];
    let mut z = vec![0.0; m];
    for cone in cones {
        cone.unit(&mut s[cone.range()]);
        cone.unit(&mut z[cone.range()]);
    }
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut log = Vec::new();
    let mut last_step = 0.0;
    let status;
    let mut residuals;
    let mut iter = 0;

    loop {
        // residuals of the embedding
        let mut rx = vec![0.0; n];
        a.mul_t_add(1.0, &y, &mut rx);
        g.mul_t_add(1.0, &z, &mut rx);
        let hresx = norm(&rx);
        axpy(&mut rx, tau, c);
        let mut ry = vec![0.0; p];
        a.mul_add(1.0, &x, &mut ry);
        let hresy = norm(&ry);
        axpy(&mut ry, -tau, b);
        let mut rz = vec![0.0; m];
        g.mul_add(1.0, &x, &mut rz);
        axpy(&mut rz, 1.0, &s);
        let hresz = norm(&rz);
        axpy(&mut rz, -tau, h);
        let cx = dot(c, &x);
        let by_hz = dot(b, &y) + dot(h, &z);
        let rt = kappa + cx + by_hz;

        let pcost = cx / tau + prog.objective_offset;
        let dcost = -by_hz / tau + prog.objective_offset;
        let sz = dot(&s, &z);
        let pres = (norm(&ry) / tau / norm_b).max(norm(&rz) / tau / norm_h);
        let dres = norm(&rx) / tau / norm_c;
        let gap_abs = (sz / (tau * tau)).max((pcost - dcost).abs());
        let gap = gap_abs / pcost.abs().min(dcost.abs()).max(1.0);
        residuals = Residuals {
            primal: pres,
            dual: dres,
            gap,
        };
        log.push(IterationInfo {
            iter,
            primal_objective: pcost,
            dual_objective: dcost,
            residuals,
            tau,
            kappa,
            step: last_step,
        });

        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        if pres <= st.tol_feas && dres <= st.tol_feas && gap <= st.tol_gap {
            status = SolveStatus::Optimal;
            break;
        }
        // infeasibility certificates
        let ratio_small = tau <= 1e-8 * kappa;
        if by_hz < 0.0 && (hresx / -by_hz <= st.tol_feas || ratio_small) {
            status = SolveStatus::PrimalInfeasible;
            break;
        }
        if cx < 0.0 && ((hresy / -cx).max(hresz / -cx) <= st.tol_feas || ratio_small) {
            status = SolveStatus::DualInfeasible;
            break;
        }
        if iter >= st.max_iters {
            status = SolveStatus::IterLimit;
            break;
        }
        iter += 1;

        // scaling
        let mut scalings: Vec<Scaling> = Vec::with_capacity(cones.len());
        let mut ok = true;
        for cone in cones {
            let r = cone.range();
            match cone.nt_scaling(&s[r.clone()], &z[r]) {
                Some(sc) => scalings.push(sc),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let mut lambda = vec![0.0; m];
        apply_blocks(cones, &scalings, Op::W, &z, &mut lambda);
        // PSD λ is diagonal in exact arithmetic; keep only the diagonal
        for cone in cones {
            if let Kind::Psd(q) = cone.kind {
                let l = &mut lambda[cone.range()];
                for j in 0..q {
                    for i in 0..j {
                        l[crate::program::svec_index(i, j)] = 0.0;
                    }
                }
            }
        }
        let Ok(factor) = kkt.factor(&scalings) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
        let (x1, y1, z1) = factor.solve(&neg_c, b, h);
        let denom_1 = dot(c, &x1) + dot(b, &y1) + dot(h, &z1);

        let mu = (sz + tau * kappa) / (degree as f64 + 1.0);

        let direction = |eta: f64, d_s: &[f64], d_k: f64| -> Direction {
            let mut t = vec![0.0; m];
            for cone in cones {
                let r = cone.range();
                cone.jordan_div(&lambda[r.clone()], &d_s[r.clone()], &mut t[r]);
            }
            let mut wt = vec![0.0; m];
            apply_blocks(cones, &scalings, Op::Wt, &t, &mut wt);
            let r1: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let r2: Vec<f64> = ry.iter().map(|v| -eta * v).collect();
            let r3: Vec<f64> = rz.iter().zip(&wt).map(|(v, w)| -eta * v - w).collect();
            let (x0, y0, z0) = factor.solve(&r1, &r2, &r3);
            let num = -eta * rt - d_k / tau - (dot(c, &x0) + dot(b, &y0) + dot(h, &z0));
            let dtau = num / (denom_1 - kappa / tau);
            let dx = combine(&x0, dtau, &x1);
            let dy = combine(&y0, dtau, &y1);
            let dz = combine(&z0, dtau, &z1);
            // ds = wt − WᵀW dz in exact arithmetic; taking it from the primal
            // row keeps G dx + ds − dτ h = −η r_z despite solve error
            let mut ds: Vec<f64> = rz.iter().zip(h).map(|(r, hv)| -eta * r + dtau * hv).collect();
            g.mul_add(-1.0, &dx, &mut ds);
            let dkappa = (d_k - kappa * dtau) / tau;
            Direction {
                dx,
                dy,
                dz,
                ds,
                dtau,
                dkappa,
            }
        };
        let max_step = |d: &Direction| -> f64 {
            let mut alpha = f64::INFINITY;
            for cone in cones {
                let r = cone.range();
                alpha = alpha.min(cone.max_step(&s[r.clone()], &d.ds[r.clone()]));
                alpha = alpha.min(cone.max_step(&z[r.clone()], &d.dz[r]));
            }
            if d.dtau < 0.0 {
                alpha = alpha.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                alpha = alpha.min(-kappa / d.dkappa);
            }
            alpha
        };

        // predictor
        let mut ll = vec![0.0; m];
        for cone in cones {
            let r = cone.range();
            cone.jordan_prod(&lambda[r.clone()], &lambda[r.clone()], &mut ll[r]);
        }
        let d_s_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
        let aff = direction(1.0, &d_s_aff, -tau * kappa);
        let alpha_aff = max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let mut wids = vec![0.0; m];
        apply_blocks(cones, &scalings, Op::WinvT, &aff.ds, &mut wids);
        let mut wdz = vec![0.0; m];
        apply_blocks(cones, &scalings, Op::W, &aff.dz, &mut wdz);
        let mut cross = vec![0.0; m];
        let mut e = vec![0.0; m];
        for cone in cones {
            let r = cone.range();
            cone.jordan_prod(&wids[r.clone()], &wdz[r.clone()], &mut cross[r.clone()]);
            cone.unit(&mut e[r]);
        }
        let d_s: Vec<f64> = (0..m)
            .map(|i| -ll[i] + sigma * mu * e[i] - cross[i])
            .collect();
        let d_k = -tau * kappa + sigma * mu - aff.dtau * aff.dkappa;
        let cor = direction(1.0 - sigma, &d_s, d_k);
        let alpha_max = max_step(&cor);
        let alpha = (st.step_fraction * alpha_max).min(1.0);
        if !(alpha > 1e-12) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        axpy(&mut x, alpha, &cor.dx);
        axpy(&mut y, alpha, &cor.dy);
        axpy(&mut z, alpha, &cor.dz);
        axpy(&mut s, alpha, &cor.ds);
        tau += alpha * cor.dtau;
        kappa += alpha * cor.dkappa;
        last_step = alpha;

        // rescale the homogeneous iterate to keep magnitudes moderate
        let scale = tau.max(kappa);
        if scale > 1e6 || scale < 1e-6 {
            for v in x.iter_mut().chain(y.iter_mut()).chain(z.iter_mut()).chain(s.iter_mut()) {
                *v /= scale;
            }
            tau /= scale;
            kappa /= scale;
        }
    }

    let (div, objective, dual_objective) = match status {
        SolveStatus::PrimalInfeasible => {
            let by_hz = dot(b, &y) + dot(h, &z);
            (-by_hz, f64::INFINITY, f64::INFINITY)
        }
        SolveStatus::DualInfeasible => {
            let cx = dot(c, &x);
            (-cx, f64::NEG_INFINITY, f64::NEG_INFINITY)
        }
        _ => {
            let pc = dot(c, &x) / tau + prog.objective_offset;
            let dc = -(dot(b, &y) + dot(h, &z)) / tau + prog.objective_offset;
            (tau, pc, dc)
        }
    };
    let inv = 1.0 / div;
    let scale = |v: Vec<f64>| v.into_iter().map(|e| e * inv).collect::<Vec<_>>();
    ConicSolution {
        status,
        x: scale(x),
        y: scale(y),
        z: scale(z),
        s: scale(s),
        objective,
        dual_objective,
        residuals,
        iterations: iter,
        log,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    #[test]
    fn rotated_cone_is_mapped_and_restored() {
        // minimize a  s.t. 2 a b ≥ u², b = 2, u = 2  →  a = 1
        let prog = program(
            3,
            vec![1.0, 0.0, 0.0],
            &[(0, 1, 1.0), (1, 2, 1.0)],
            vec![2.0, 2.0],
            &[(0, 0, -1.0), (1, 1, -1.0), (2, 2, -1.0)],
            vec![0.0; 3],
            vec![ConeBlock::RotatedSecondOrder { dim: 3 }],
        );
        let sol = solve(&prog, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-7);
        // slack is reported in the rotated coordinates
        assert!((sol.s[0] - 1.0).abs() < 1e-6 && (sol.s[1] - 2.0).abs() < 1e-6);
        let zr = &sol.z;
        assert!(2.0 * zr[0] * zr[1] >= zr[2] * zr[2] - 1e-6);
    }

    #[test]
    fn unbounded_program_is_dual_infeasible() {
        // minimize −x  s.t. x ≥ 0
        let prog = program(
            1,
            vec![-1.0],
            &[],
            vec![],
            &[(0, 0, -1.0)],
            vec![0.0],
            vec![ConeBlock::Nonneg { dim: 1 }],
        );
        let sol = solve(&prog, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::DualInfeasible);
    }

    #[test]
    fn contradictory_bounds_are_primal_infeasible() {
        // x ≥ 2 and x ≤ 1
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
    }

    #[test]
    fn bad_settings_rejected() {
        let prog = program(1, vec![1.0], &[], vec![], &[(0, 0, -1.0)], vec![-1.0],
            vec![ConeBlock::Nonneg { dim: 1 }]);
        let st = SolverSettings { step_fraction: 1.0, ..Default::default() };
        assert!(solve(&prog, &st).is_err());
    }
}
