//! Maps between voltages, partial matrices and branch flow points, and
//! recovery of an optimal voltage profile from a relaxed solution together
//! with the exactness diagnostics that justify it.

use std::time::Instant;

use nalgebra::SymmetricEigen;
use opfrelax_conic::{solve, SolveStatus, SolverSettings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chordal::{fundamental_cycles, Graph};
use crate::network::{Complex, CostSpec, Network};
use crate::partial::{wrap_angle, GPartialMatrix, HermitianMatrix, PartialError};
use crate::relax::{build, OpfModel, RelaxError, RelaxedPoint, Relaxation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("matrix has no positive eigenvalue")]
    ZeroMatrix,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Partial(#[from] PartialError),
}

/// Point `(S, ℓ, v)` of the branch flow model, indexed like the network's lines and buses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFlowPoint {
    pub s: Vec<Complex>,
    pub ell: Vec<f64>,
    pub v: Vec<f64>,
}

/// Bus voltages with the line currents and sending-end flows they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageProfile {
    pub v: Vec<Complex>,
    pub currents: Vec<Complex>,
    pub flows: Vec<Complex>,
    pub injections: Vec<Complex>,
}

impl VoltageProfile {
    pub fn new(net: &Network, v: Vec<Complex>) -> Self {
        let currents: Vec<Complex> = net.lines.iter().map(|l| l.current(&v)).collect();
        let flows = net
            .lines
            .iter()
            .zip(&currents)
            .map(|(l, i)| v[l.from] * i.conj())
            .collect();
        let injections = net.injections(&v);
        VoltageProfile {
            v,
            currents,
            flows,
            injections,
        }
    }
}

/// Thresholds deciding whether a relaxed point is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactnessTolerances {
    pub eig_ratio: f64,
    pub cycle: f64,
}

impl Default for ExactnessTolerances {
    fn default() -> Self {
        ExactnessTolerances {
            eig_ratio: 1e-5,
            cycle: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// `λ₂/λ₁` of the full matrix, or the largest clique or edge ratio.
    pub eig_ratio: f64,
    pub cycle_residual: f64,
    pub exact: bool,
    pub voltage: Option<VoltageProfile>,
    /// `|cost(V) − objective| / max(1, |objective|)` when a voltage and objective are known.
    pub objective_gap: Option<f64>,
}

impl RecoveryReport {
    /// Fills in the voltage's network quantities and the objective gap.
    pub fn attach(mut self, net: &Network, cost: &CostSpec, objective: Option<f64>) -> Self {
        if let Some(p) = self.voltage.take() {
            let p = VoltageProfile::new(net, p.v);
            if let Some(obj) = objective {
                let c = cost.evaluate(&p.injections);
                self.objective_gap = Some((c - obj).abs() / obj.abs().max(1.0));
            }
            self.voltage = Some(p);
        }
        self
    }
}

fn bare_profile(v: Vec<Complex>) -> VoltageProfile {
    VoltageProfile {
        v,
        currents: Vec::new(),
        flows: Vec::new(),
        injections: Vec::new(),
    }
}

/// `f(V)`: the restriction of `V Vᴴ` to `I_G`.
pub fn f_map(v: &[Complex], g: &Graph) -> GPartialMatrix {
    let mut w = GPartialMatrix::zeros(g.clone());
    for (j, x) in v.iter().enumerate() {
        w.diag[j] = Complex::new(x.norm_sqr(), 0.0);
    }
    for (a, b) in g.edges() {
        w.set(a, b, v[a] * v[b].conj());
    }
    w
}

/// `g(W_G)`: `S = yᴴ(W_ii − W_ij)`, `ℓ = |y|²(W_ii − W_ij − W_ji + W_jj)`, `v = diag W`
/// over the directed lines `i → j` of the network.
pub fn g_map(w: &GPartialMatrix, net: &Network) -> BranchFlowPoint {
    let mut s = Vec::with_capacity(net.m());
    let mut ell = Vec::with_capacity(net.m());
    for l in &net.lines {
        let (i, j) = (l.from, l.to);
        let wii = w.diag[i];
        let wjj = w.diag[j];
        let wij = w.get(i, j).expect("line in pattern");
        let wji = w.get(j, i).expect("line in pattern");
        s.push(l.y.conj() * (wii - wij));
        ell.push(l.y.norm_sqr() * (wii - wij - wji + wjj).re);
    }
    BranchFlowPoint {
        s,
        ell,
        v: w.diag.iter().map(|d| d.re).collect(),
    }
}

/// Inverse of [`g_map`]: `W_ii = v_i`, `W_ij = v_i − zᴴ S_ij`, `W_ji = conj(W_ij)`.
pub fn g_inv(x: &BranchFlowPoint, net: &Network) -> GPartialMatrix {
    let mut w = GPartialMatrix::zeros(net.graph());
    for (j, &v) in x.v.iter().enumerate() {
        w.diag[j] = Complex::new(v, 0.0);
    }
    for (k, l) in net.lines.iter().enumerate() {
        w.set(l.from, l.to, x.v[l.from] - l.z.conj() * x.s[k]);
    }
    w
}

/// Rank-one decomposition of a full matrix: `V = √λ₁ u₁` with `∠V₀ = 0`.
pub fn recover_from_full(w: &HermitianMatrix, tol: &ExactnessTolerances) -> Result<RecoveryReport, RecoveryError> {
    let n = w.n();
    let eig = SymmetricEigen::new(w.matrix().clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[idx[0]];
    if !(l1 > 0.0) {
        return Err(RecoveryError::ZeroMatrix);
    }
    let l2 = idx.get(1).map(|&i| eig.eigenvalues[i]).unwrap_or(0.0);
    // eigenvalues within rounding of zero count as zero
    let ratio = if l2.abs() <= n as f64 * f64::EPSILON * l1 {
        0.0
    } else {
        l2.abs() / l1
    };
    let u = eig.eigenvectors.column(idx[0]);
    let phase = if u[0].norm() > 0.0 { u[0].conj() / u[0].norm() } else { Complex::new(1.0, 0.0) };
    let v: Vec<Complex> = u.iter().map(|x| x * phase * l1.sqrt()).collect();
    let exact = ratio <= tol.eig_ratio;
    Ok(RecoveryReport {
        eig_ratio: ratio,
        cycle_residual: 0.0,
        exact,
        voltage: exact.then(|| bare_profile(v)),
        objective_gap: None,
    })
}

/// Exactness of a partial matrix on the given cliques plus the cycle
/// condition on the fundamental cycles of its pattern. The voltage comes
/// from angle propagation when exact.
pub fn recover_on_cliques(
    w: &GPartialMatrix,
    cliques: &[Vec<usize>],
    tol: &ExactnessTolerances,
) -> Result<RecoveryReport, RecoveryError> {
    let ratio = w.max_rank1_ratio(cliques);
    let cycles = fundamental_cycles(&w.graph);
    let cycle_residual = match w.cycle_residual(&cycles) {
        Ok(r) => r,
        Err(PartialError::ZeroOnCycle(..)) => f64::INFINITY,
        Err(e) => return Err(e.into()),
    };
    let exact = ratio <= tol.eig_ratio && cycle_residual <= tol.cycle;
    let voltage = if exact { Some(bare_profile(w.propagate_angles()?)) } else { None };
    Ok(RecoveryReport {
        eig_ratio: ratio,
        cycle_residual,
        exact,
        voltage,
        objective_gap: None,
    })
}

/// [`recover_on_cliques`] with the edges of the pattern as cliques.
pub fn recover_from_partial(w: &GPartialMatrix, tol: &ExactnessTolerances) -> Result<RecoveryReport, RecoveryError> {
    recover_on_cliques(w, &w.edge_cliques(), tol)
}

/// Whether `W_G` lies in `𝕎₂⁻`: every edge block is rank one and PSD and
/// the cycle condition holds.
pub fn in_w2_nc(w: &GPartialMatrix, tol: f64) -> bool {
    w.rank1_complete(tol).is_ok()
}

/// Exactness of a branch flow point: every SOC tight (measured as the
/// rank-one ratio of the edge blocks of [`g_inv`]) and the angle differences
/// `β = ∠(v_i − zᴴ S)` summing to zero around every cycle.
pub fn recover_bf(x: &BranchFlowPoint, net: &Network, tol: &ExactnessTolerances) -> Result<RecoveryReport, RecoveryError> {
    let n = net.n();
    if x.v.len() != n || x.s.len() != net.m() || x.ell.len() != net.m() {
        return Err(RecoveryError::Dimension("branch flow point does not match the network".into()));
    }
    let w = g_inv(x, net);
    let ratio = w.max_rank1_ratio(&w.edge_cliques());
    let beta: Vec<f64> = net
        .lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let d = x.v[l.from] - l.z.conj() * x.s[k];
            if d.norm() > 0.0 {
                d.arg()
            } else {
                0.0
            }
        })
        .collect();
    let g = net.graph();
    let (order, parent) = g.bfs_tree(0);
    if order.len() != n {
        return Err(RecoveryError::Dimension("network is not connected".into()));
    }
    let mut theta = vec![0.0; n];
    let mut tree = vec![false; net.m()];
    for &c in &order {
        if let Some(p) = parent[c] {
            let k = net.line_between(p, c).expect("tree edge is a line");
            tree[k] = true;
            let l = &net.lines[k];
            theta[c] = if l.from == p { theta[p] - beta[k] } else { theta[p] + beta[k] };
        }
    }
    let cycle_residual = net
        .lines
        .iter()
        .enumerate()
        .filter(|(k, _)| !tree[*k])
        .map(|(k, l)| wrap_angle(theta[l.from] - theta[l.to] - beta[k]).abs())
        .fold(0.0, f64::max);
    let exact = ratio <= tol.eig_ratio && cycle_residual <= tol.cycle;
    let v = (0..n)
        .map(|j| Complex::from_polar(x.v[j].max(0.0).sqrt(), theta[j]))
        .collect();
    Ok(RecoveryReport {
        eig_ratio: ratio,
        cycle_residual,
        exact,
        voltage: exact.then(|| bare_profile(v)),
        objective_gap: None,
    })
}

/// Exactness report for a relaxed point produced by `relaxation`.
pub fn recover(
    point: &RelaxedPoint,
    relaxation: Relaxation,
    blocks: &[Vec<usize>],
    net: &Network,
    tol: &ExactnessTolerances,
) -> Result<RecoveryReport, RecoveryError> {
    match (point, relaxation) {
        (RelaxedPoint::BranchFlow(x), _) => recover_bf(x, net, tol),
        (RelaxedPoint::Matrix(w), Relaxation::R1) => {
            let full = HermitianMatrix::from_matrix(w.submatrix(&(0..w.n()).collect::<Vec<_>>()).expect("complete pattern"))?;
            recover_from_full(&full, tol)
        }
        (RelaxedPoint::Matrix(w), _) => recover_on_cliques(w, blocks, tol),
    }
}

/// One relaxation's outcome on a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub relaxation: Relaxation,
    pub status: String,
    pub objective: f64,
    pub eig_ratio: f64,
    pub cycle_residual: f64,
    pub exact: bool,
    pub iterations: usize,
    pub seconds: f64,
}

/// Builds, solves and checks exactness of each relaxation in turn.
/// Relaxations that cannot be built (taps for branch flow, size caps) are skipped.
pub fn compare_relaxations(
    model: &OpfModel,
    relaxations: &[Relaxation],
    settings: &SolverSettings,
    tol: &ExactnessTolerances,
) -> Result<Vec<ComparisonRow>, RelaxError> {
    let mut rows = Vec::new();
    for &r in relaxations {
        let start = Instant::now();
        let built = match build(model, r) {
            Ok(b) => b,
            Err(RelaxError::TapPresent(_)) | Err(RelaxError::CapExceeded { .. }) => continue,
            Err(e) => return Err(e),
        };
        let sol = solve(&built.program, settings)?;
        let seconds = start.elapsed().as_secs_f64();
        let (eig_ratio, cycle_residual, exact) = if sol.status == SolveStatus::Optimal {
            match recover(&built.extract(&sol.x), r, &built.blocks, &model.network, tol) {
                Ok(rep) => (rep.eig_ratio, rep.cycle_residual, rep.exact),
                Err(_) => (f64::NAN, f64::NAN, false),
            }
        } else {
            (f64::NAN, f64::NAN, false)
        };
        rows.push(ComparisonRow {
            relaxation: r,
            status: sol.status.to_string(),
            objective: sol.objective,
            eig_ratio,
            cycle_residual,
            exact,
            iterations: sol.iterations,
            seconds,
        });
    }
    Ok(rows)
}
