//! Partial Hermitian matrices specified on the diagonal and the edges of a
//! graph, with clique-wise PSD and rank-one tests, the cycle condition on
//! off-diagonal angles, and the two completion constructions (rank-one
//! completion by angle propagation and PSD completion on chordal patterns).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chordal::{cliques_from_peo, fundamental_cycles, is_peo, mcs_order, Graph};
use crate::network::Complex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartialError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("entry ({0}, {1}) is not Hermitian")]
    NotHermitian(usize, usize),
    #[error("negative diagonal entry at {0}")]
    NegativeDiagonal(usize),
    #[error("edge ({0}, {1}) is not positive semidefinite of rank one (σ₂/σ₁ = {2:e})")]
    EdgeNotRank1(usize, usize, f64),
    #[error("off-diagonal entry ({0}, {1}) on a cycle is zero; its angle is undefined")]
    ZeroOnCycle(usize, usize),
    #[error("cycle condition violated on cycle {0:?} (residual {1:e})")]
    CycleViolated(Vec<usize>, f64),
    #[error("pattern graph is not chordal")]
    NotChordal,
    #[error("pattern graph is not connected")]
    Disconnected,
    #[error("clique {0:?} is not positive semidefinite (min eigenvalue {1:e})")]
    CliqueNotPsd(Vec<usize>, f64),
}

/// Dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<Complex>,
}

impl HermitianMatrix {
    /// Wraps `m` after checking it equals its conjugate transpose within
    /// `1e-12` of its largest entry; the result is exactly Hermitian.
    pub fn from_matrix(m: DMatrix<Complex>) -> Result<Self, PartialError> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(PartialError::Dimension("matrix is not square".into()));
        }
        let scale = m.iter().map(|x| x.norm()).fold(1e-300, f64::max);
        let mut h = m.clone();
        for i in 0..n {
            for j in i..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-12 * scale {
                    return Err(PartialError::NotHermitian(i, j));
                }
                if i == j {
                    h[(i, i)] = Complex::new(m[(i, i)].re, 0.0);
                } else {
                    h[(j, i)] = m[(i, j)].conj();
                }
            }
        }
        Ok(HermitianMatrix { m: h })
    }

    /// `v vᴴ`
    pub fn outer(v: &[Complex]) -> Self {
        let n = v.len();
        let mut m = DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj());
        for i in 0..n {
            m[(i, i)] = Complex::new(v[i].norm_sqr(), 0.0);
        }
        HermitianMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex> {
        &self.m
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.m.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

/// Values on `I_G = {(j, j)} ∪ {(j, k), (k, j) : (j, k) ∈ E}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPartialMatrix {
    pub graph: Graph,
    pub diag: Vec<Complex>,
    /// Both orientations of every edge.
    #[serde(with = "pair_map")]
    pub offdiag: BTreeMap<(usize, usize), Complex>,
}

mod pair_map {
    use super::Complex;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        m: &BTreeMap<(usize, usize), Complex>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let v: Vec<(usize, usize, Complex)> = m.iter().map(|(&(a, b), &c)| (a, b, c)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(usize, usize), Complex>, D::Error> {
        let v = Vec::<(usize, usize, Complex)>::deserialize(d)?;
        Ok(v.into_iter().map(|(a, b, c)| ((a, b), c)).collect())
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn hermitian_eigs(m: DMatrix<Complex>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `σ₂/σ₁` of a Hermitian PSD-ish block (eigenvalue magnitudes); `None` if the block is zero.
fn rank1_ratio(m: DMatrix<Complex>) -> Option<f64> {
    let mut sv: Vec<f64> = hermitian_eigs(m).into_iter().map(f64::abs).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let s1 = sv[0];
    if !(s1 > 0.0) {
        return None;
    }
    Some(sv.get(1).copied().unwrap_or(0.0) / s1)
}

impl GPartialMatrix {
    /// All-zero partial matrix on `graph`.
    pub fn zeros(graph: Graph) -> Self {
        let n = graph.n();
        let mut offdiag = BTreeMap::new();
        for (a, b) in graph.edges() {
            offdiag.insert((a, b), Complex::new(0.0, 0.0));
            offdiag.insert((b, a), Complex::new(0.0, 0.0));
        }
        GPartialMatrix {
            graph,
            diag: vec![Complex::new(0.0, 0.0); n],
            offdiag,
        }
    }

    /// Restriction of `w` to `I_G`.
    pub fn from_full(w: &HermitianMatrix, g: &Graph) -> Result<Self, PartialError> {
        if w.n() != g.n() {
            return Err(PartialError::Dimension(format!(
                "matrix of order {} on a graph with {} nodes",
                w.n(),
                g.n()
            )));
        }
        let mut p = GPartialMatrix::zeros(g.clone());
        for j in 0..g.n() {
            p.diag[j] = w.get(j, j);
        }
        for (a, b) in g.edges() {
            p.offdiag.insert((a, b), w.get(a, b));
            p.offdiag.insert((b, a), w.get(b, a));
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Entry `(j, k)` if it lies in `I_G`.
    pub fn get(&self, j: usize, k: usize) -> Option<Complex> {
        if j == k {
            self.diag.get(j).copied()
        } else {
            self.offdiag.get(&(j, k)).copied()
        }
    }

    /// Sets `(j, k)` to `val` and `(k, j)` to its conjugate.
    ///
    /// # Panics
    /// If `(j, k)` is not in `I_G`.
    pub fn set(&mut self, j: usize, k: usize, val: Complex) {
        if j == k {
            self.diag[j] = Complex::new(val.re, 0.0);
        } else {
            assert!(self.graph.has_edge(j, k), "({j}, {k}) is not an edge");
            self.offdiag.insert((j, k), val);
            self.offdiag.insert((k, j), val.conj());
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.diag.iter().all(|d| d.im.abs() <= tol)
            && self
                .offdiag
                .iter()
                .all(|(&(a, b), v)| (self.offdiag[&(b, a)] - v.conj()).norm() <= tol)
    }

    /// Largest diagonal magnitude; the scale for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.diag.iter().map(|d| d.re.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE)
    }

    /// Principal submatrix on `nodes`, if every needed entry is stored.
    pub fn submatrix(&self, nodes: &[usize]) -> Option<DMatrix<Complex>> {
        let k = nodes.len();
        let mut m = DMatrix::zeros(k, k);
        for (a, &i) in nodes.iter().enumerate() {
            for (b, &j) in nodes.iter().enumerate() {
                m[(a, b)] = self.get(i, j)?;
            }
        }
        Some(m)
    }

    /// Smallest eigenvalue over the given cliques (`+∞` if none).
    pub fn min_clique_eigenvalue(&self, cliques: &[Vec<usize>]) -> f64 {
        cliques
            .iter()
            .map(|c| {
                let m = self.submatrix(c).expect("clique entries stored");
                hermitian_eigs(m)[0]
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Every clique submatrix has smallest eigenvalue `≥ −tol · scale`.
    pub fn is_psd_partial(&self, cliques: &[Vec<usize>], tol: f64) -> bool {
        self.min_clique_eigenvalue(cliques) >= -tol * self.scale()
    }

    /// Largest `σ₂/σ₁` over the cliques; `+∞` when some clique block vanishes.
    pub fn max_rank1_ratio(&self, cliques: &[Vec<usize>]) -> f64 {
        cliques
            .iter()
            .map(|c| rank1_ratio(self.submatrix(c).expect("clique entries stored")).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Every clique submatrix has `σ₂/σ₁ ≤ tol` and `σ₁ > 0`.
    pub fn is_rank1_partial(&self, cliques: &[Vec<usize>], tol: f64) -> bool {
        self.max_rank1_ratio(cliques) <= tol
    }

    /// Edges of the pattern as two-node cliques.
    pub fn edge_cliques(&self) -> Vec<Vec<usize>> {
        self.graph.edges().into_iter().map(|(a, b)| vec![a, b]).collect()
    }

    /// Largest `|wrap(Σ ∠W_{n_i n_{i+1}})|` over closed node sequences.
    pub fn cycle_residual(&self, cycles: &[Vec<usize>]) -> Result<f64, PartialError> {
        self.cycle_residual_with(cycles, false)
    }

    fn cycle_residual_with(&self, cycles: &[Vec<usize>], zero_ok: bool) -> Result<f64, PartialError> {
        let mut worst: f64 = 0.0;
        for c in cycles {
            let mut sum = 0.0;
            for i in 0..c.len() {
                let (a, b) = (c[i], c[(i + 1) % c.len()]);
                let w = self
                    .get(a, b)
                    .ok_or_else(|| PartialError::Dimension(format!("({a}, {b}) not stored")))?;
                if w.norm() == 0.0 {
                    if zero_ok {
                        continue;
                    }
                    return Err(PartialError::ZeroOnCycle(a, b));
                }
                sum += w.arg();
            }
            worst = worst.max(wrap_angle(sum).abs());
        }
        Ok(worst)
    }

    /// Voltage-like vector `V` with `V_j Vₖᴴ = W_jk` on a BFS spanning tree from node 0.
    pub fn propagate_angles(&self) -> Result<Vec<Complex>, PartialError> {
        let (order, parent) = self.graph.bfs_tree(0);
        if order.len() != self.n() {
            return Err(PartialError::Disconnected);
        }
        let mut theta = vec![0.0; self.n()];
        for &v in &order {
            if let Some(p) = parent[v] {
                let w = self.get(p, v).unwrap();
                let angle = if w.norm() == 0.0 { 0.0 } else { w.arg() };
                theta[v] = theta[p] - angle;
            }
        }
        Ok((0..self.n())
            .map(|j| Complex::from_polar(self.diag[j].re.max(0.0).sqrt(), theta[j]))
            .collect())
    }

    /// Rank-one completion `V Vᴴ`: magnitudes from the diagonal, angles
    /// propagated along a BFS tree from node 0.
    pub fn rank1_complete(&self, tol: f64) -> Result<HermitianMatrix, PartialError> {
        let scale = self.scale();
        if !self.is_hermitian(tol * scale) {
            let (&(a, b), _) = self
                .offdiag
                .iter()
                .find(|(&(a, b), v)| (self.offdiag[&(b, a)] - v.conj()).norm() > tol * scale)
                .unwrap_or((&(0, 0), &Complex::new(0.0, 0.0)));
            return Err(PartialError::NotHermitian(a, b));
        }
        for (j, d) in self.diag.iter().enumerate() {
            if d.re < -tol * scale {
                return Err(PartialError::NegativeDiagonal(j));
            }
        }
        for (a, b) in self.graph.edges() {
            let (wa, wb) = (self.diag[a].re, self.diag[b].re);
            let w = self.get(a, b).unwrap();
            if wa <= tol * scale || wb <= tol * scale {
                if w.norm() > tol * scale {
                    return Err(PartialError::EdgeNotRank1(a, b, f64::INFINITY));
                }
                continue;
            }
            let ratio = rank1_ratio(self.submatrix(&[a, b]).unwrap()).unwrap_or(f64::INFINITY);
            let min_eig = hermitian_eigs(self.submatrix(&[a, b]).unwrap())[0];
            if ratio > tol || min_eig < -tol * scale {
                return Err(PartialError::EdgeNotRank1(a, b, ratio));
            }
        }
        for c in fundamental_cycles(&self.graph) {
            let r = self.cycle_residual_with(std::slice::from_ref(&c), true)?;
            if r > tol {
                return Err(PartialError::CycleViolated(c, r));
            }
        }
        let v = self.propagate_angles()?;
        Ok(HermitianMatrix::outer(&v))
    }

    /// PSD completion of a partial matrix on a chordal pattern. Missing
    /// entries are filled vertex by vertex in reverse elimination order
    /// with `W_vu = W_vN W_NN⁺ W_Nu`, `N` the later neighbours of `v`.
    /// Stored entries are copied unchanged.
    pub fn chordal_psd_complete(&self, tol: f64) -> Result<HermitianMatrix, PartialError> {
        let g = &self.graph;
        let n = g.n();
        let peo = mcs_order(g);
        if !is_peo(g, &peo) {
            return Err(PartialError::NotChordal);
        }
        let scale = self.scale();
        for c in cliques_from_peo(g, &peo) {
            let e = hermitian_eigs(self.submatrix(&c).unwrap())[0];
            if e < -tol * scale {
                return Err(PartialError::CliqueNotPsd(c, e));
            }
        }
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = self.diag[j];
        }
        for (&(a, b), &v) in &self.offdiag {
            m[(a, b)] = v;
        }
        let mut pos = vec![0; n];
        for (i, &v) in peo.iter().enumerate() {
            pos[v] = i;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let v = peo[i];
            let later = &peo[i + 1..];
            let nb: Vec<usize> = g.neighbors(v).iter().copied().filter(|&w| pos[w] > i).collect();
            let missing: Vec<usize> = later.iter().copied().filter(|u| !g.has_edge(v, *u)).collect();
            if missing.is_empty() {
                continue;
            }
            if nb.is_empty() {
                // nothing links v to the completed block: leave zeros
                continue;
            }
            let k = nb.len();
            let w_nn = DMatrix::from_fn(k, k, |a, b| m[(nb[a], nb[b])]);
            let pinv = hermitian_pinv(w_nn);
            let w_vn = DMatrix::from_fn(1, k, |_, b| m[(v, nb[b])]);
            let coeff = w_vn * pinv;
            for &u in &missing {
                let mut acc = Complex::new(0.0, 0.0);
                for (b, &w) in nb.iter().enumerate() {
                    acc += coeff[(0, b)] * m[(w, u)];
                }
                m[(v, u)] = acc;
                m[(u, v)] = acc.conj();
            }
        }
        Ok(HermitianMatrix { m })
    }
}

/// Moore–Penrose inverse of a Hermitian PSD matrix; eigenvalues below
/// `1e-10 · λ_max` are treated as zero.
fn hermitian_pinv(m: DMatrix<Complex>) -> DMatrix<Complex> {
    let eig = SymmetricEigen::new(m);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = 1e-10 * lmax;
    let k = eig.eigenvalues.len();
    let mut out = DMatrix::zeros(k, k);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cut {
            let u = eig.eigenvectors.column(i);
            out += (&u * u.adjoint()) * Complex::new(1.0 / l, 0.0);
        }
    }
    out
}
