//! Dense KKT system.
//!
//! Solves
//!
//! ```text
//! [ 0  Aᵀ  Gᵀ   ] [dx]   [r1]
//! [ A  0   0    ] [dy] = [r2]
//! [ G  0  −WᵀW  ] [dz]   [r3]
//! ```
//!
//! in the scaled variables `dz̃ = W dz`, where the system reads
//!
//! ```text
//! [ 0   Aᵀ  G̃ᵀ ] [dx ]   [r1    ]
//! [ A   0   0  ] [dy ] = [r2    ]
//! [ G̃   0   −I ] [dz̃]   [W⁻ᵀr3 ]      G̃ = W⁻ᵀG
//! ```
//!
//! The matrix is equilibrated and factored by LU with partial pivoting.
//! Solutions are polished by iterative refinement against the original
//! system.

use nalgebra::{DMatrix, DVector, LU};

use crate::cones::{Cone, Op, Scaling};
use crate::program::SparseMatrix;

#[derive(Debug, Clone)]
pub(crate) struct KktStructure {
    n: usize,
    g: SparseMatrix,
    a: SparseMatrix,
    cones: Vec<Cone>,
}

pub(crate) struct KktFactor<'a> {
    st: &'a KktStructure,
    scalings: &'a [Scaling],
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Symmetric equilibration `D K D` that was factored.
    d: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct FactorError;

impl KktStructure {
    pub fn new(n: usize, g: SparseMatrix, a: SparseMatrix, cones: Vec<Cone>) -> Self {
        KktStructure { n, g, a, cones }
    }

    pub fn g(&self) -> &SparseMatrix {
        &self.g
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn factor<'a>(&'a self, scalings: &'a [Scaling]) -> Result<KktFactor<'a>, FactorError> {
        let n = self.n;
        let p = self.a.nrows();
        let m = self.g.nrows();
        let dim = n + p + m;
        let mut k = DMatrix::<f64>::zeros(dim, dim);
        for (r, c, v) in self.a.triplets() {
            k[(n + r, c)] = v;
            k[(c, n + r)] = v;
        }
        // G̃ = W⁻ᵀ G, one block column at a time
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c, v) in self.g.triplets() {
            cols[c].push((r, v));
        }
        let mut buf = Vec::new();
        let mut out = Vec::new();
        for (cone, sc) in self.cones.iter().zip(scalings) {
            let range = cone.range();
            buf.resize(cone.dim, 0.0);
            out.resize(cone.dim, 0.0);
            for (c, col) in cols.iter().enumerate() {
                let mut any = false;
                buf.iter_mut().for_each(|x| *x = 0.0);
                for &(r, v) in col {
                    if range.contains(&r) {
                        buf[r - cone.offset] = v;
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                sc.apply(Op::WinvT, &buf, &mut out);
                for (i, &v) in out.iter().enumerate() {
                    k[(n + p + cone.offset + i, c)] = v;
                    k[(c, n + p + cone.offset + i)] = v;
                }
            }
        }
        for i in n + p..dim {
            k[(i, i)] = -1.0;
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(FactorError);
        }
        let d = equilibrate(&mut k);
        let lu = LU::new(k);
        if !lu.is_invertible() {
            return Err(FactorError);
        }
        Ok(KktFactor {
            st: self,
            scalings,
            lu,
            d,
        })
    }
}

/// Ruiz equilibration: scales `k` in place to `D k D` with every row's
/// largest magnitude close to one and returns the diagonal of `D`.
fn equilibrate(k: &mut DMatrix<f64>) -> Vec<f64> {
    let dim = k.nrows();
    let mut d = vec![1.0; dim];
    for _ in 0..10 {
        let mut f = vec![1.0; dim];
        let mut done = true;
        for j in 0..dim {
            let mx = k.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if mx > 0.0 {
                f[j] = 1.0 / mx.sqrt();
                done &= (1.0 - mx).abs() < 1e-2;
            }
        }
        if done {
            break;
        }
        for j in 0..dim {
            for i in 0..dim {
                k[(i, j)] *= f[i] * f[j];
            }
            d[j] *= f[j];
        }
    }
    d
}

/// Applies a scaling operator blockwise to a full cone-space vector.
pub(crate) fn apply_blocks(cones: &[Cone], scalings: &[Scaling], op: Op, v: &[f64], out: &mut [f64]) {
    for (cone, sc) in cones.iter().zip(scalings) {
        let r = cone.range();
        sc.apply(op, &v[r.clone()], &mut out[r]);
    }
}

impl KktFactor<'_> {
    fn solve_once(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (n, p) = (r1.len(), r2.len());
        let mut r3s = vec![0.0; r3.len()];
        apply_blocks(&self.st.cones, self.scalings, Op::WinvT, r3, &mut r3s);
        let rhs = DVector::from_iterator(
            n + p + r3.len(),
            r1.iter().chain(r2).chain(&r3s).zip(&self.d).map(|(v, d)| v * d),
        );
        let mut sol = self.lu.solve(&rhs).expect("factor is invertible");
        for (v, d) in sol.iter_mut().zip(&self.d) {
            *v *= d;
        }
        let sol = sol.as_slice();
        let mut dz = vec![0.0; r3.len()];
        apply_blocks(&self.st.cones, self.scalings, Op::Winv, &sol[n + p..], &mut dz);
        (sol[..n].to_vec(), sol[n..n + p].to_vec(), dz)
    }

    fn residual(
        &self,
        r: (&[f64], &[f64], &[f64]),
        sol: (&[f64], &[f64], &[f64]),
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let st = self.st;
        let (dx, dy, dz) = sol;
        let mut e1 = r.0.to_vec();
        st.a.mul_t_add(-1.0, dy, &mut e1);
        st.g.mul_t_add(-1.0, dz, &mut e1);
        let mut e2 = r.1.to_vec();
        st.a.mul_add(-1.0, dx, &mut e2);
        let mut e3 = r.2.to_vec();
        st.g.mul_add(-1.0, dx, &mut e3);
        let mut wdz = vec![0.0; dz.len()];
        apply_blocks(&st.cones, self.scalings, Op::Gram, dz, &mut wdz);
        for (a, b) in e3.iter_mut().zip(&wdz) {
            *a += b;
        }
        (e1, e2, e3)
    }

    /// Solves the KKT system with iterative refinement.
    pub fn solve(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mut dx, mut dy, mut dz) = self.solve_once(r1, r2, r3);
        let scale = inf_norm(r1).max(inf_norm(r2)).max(inf_norm(r3)).max(1e-300);
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let (e1, e2, e3) = self.residual((r1, r2, r3), (&dx, &dy, &dz));
            let err = inf_norm(&e1).max(inf_norm(&e2)).max(inf_norm(&e3));
            if err <= 1e-14 * scale || err >= 0.5 * last {
                break;
            }
            last = err;
            let (cx, cy, cz) = self.solve_once(&e1, &e2, &e3);
            add_into(&mut dx, &cx);
            add_into(&mut dy, &cy);
            add_into(&mut dz, &cz);
        }
        (dx, dy, dz)
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
