//! Cone arithmetic used by the interior-point iteration: Jordan products,
//! step-to-boundary computations and Nesterov–Todd scalings.
//!
//! Rotated second-order cones never reach this module; the solver maps them
//! onto ordinary second-order cones before iterating.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::program::svec_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Nonneg,
    Soc,
    Psd(usize),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cone {
    pub kind: Kind,
    pub offset: usize,
    pub dim: usize,
}

pub(crate) fn smat(v: &[f64], p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..p {
        for i in 0..=j {
            let x = v[svec_index(i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                m[(i, j)] = x * r2;
                m[(j, i)] = x * r2;
            }
        }
    }
    m
}

pub(crate) fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let p = m.nrows();
    let s2 = std::f64::consts::SQRT_2;
    for j in 0..p {
        for i in 0..=j {
            out[svec_index(i, j)] = if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)]) * s2
            };
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

impl Cone {
    pub fn degree(&self) -> usize {
        match self.kind {
            Kind::Nonneg => self.dim,
            Kind::Soc => 1,
            Kind::Psd(p) => p,
        }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.dim
    }

    /// Writes the identity element `e` into `out` (block-local slice).
    pub fn unit(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        match self.kind {
            Kind::Nonneg => out.iter_mut().for_each(|x| *x = 1.0),
            Kind::Soc => out[0] = 1.0,
            Kind::Psd(p) => {
                for i in 0..p {
                    out[svec_index(i, i)] = 1.0;
                }
            }
        }
    }

    /// Largest `α` with `v + α dv` in the cone, for interior `v`.
    /// Returns `f64::INFINITY` when the ray never leaves the cone.
    pub fn max_step(&self, v: &[f64], dv: &[f64]) -> f64 {
        match self.kind {
            Kind::Nonneg => v
                .iter()
                .zip(dv)
                .filter(|(_, &d)| d < 0.0)
                .map(|(&x, &d)| -x / d)
                .fold(f64::INFINITY, f64::min),
            Kind::Soc => soc_max_step(v, dv),
            Kind::Psd(p) => {
                let x = smat(v, p);
                let d = smat(dv, p);
                let Some(chol) = x.cholesky() else {
                    return 0.0;
                };
                let l = chol.l();
                // L⁻¹ D L⁻ᵀ
                let Some(tmp) = l.solve_lower_triangular(&d) else {
                    return 0.0;
                };
                let Some(m) = l.solve_lower_triangular(&tmp.transpose()) else {
                    return 0.0;
                };
                let m = 0.5 * (&m + m.transpose());
                let lmin = min_eigenvalue(m);
                if lmin >= 0.0 {
                    f64::INFINITY
                } else {
                    -1.0 / lmin
                }
            }
        }
    }

    /// Jordan product `u ∘ v`.
    pub fn jordan_prod(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        match self.kind {
            Kind::Nonneg => {
                for ((o, a), b) in out.iter_mut().zip(u).zip(v) {
                    *o = a * b;
                }
            }
            Kind::Soc => {
                out[0] = dot(u, v);
                for i in 1..u.len() {
                    out[i] = u[0] * v[i] + v[0] * u[i];
                }
            }
            Kind::Psd(p) => {
                let a = smat(u, p);
                let b = smat(v, p);
                let prod = &a * &b;
                let sym = 0.5 * (&prod + prod.transpose());
                svec_into(&sym, out);
            }
        }
    }

    /// Solves `λ ∘ x = d` where `λ` is a scaled point (diagonal for PSD blocks).
    pub fn jordan_div(&self, lambda: &[f64], d: &[f64], out: &mut [f64]) {
        match self.kind {
            Kind::Nonneg => {
                for ((o, l), x) in out.iter_mut().zip(lambda).zip(d) {
                    *o = x / l;
                }
            }
            Kind::Soc => {
                let l0 = lambda[0];
                let l1 = &lambda[1..];
                let det = l0 * l0 - dot(l1, l1);
                let x0 = (l0 * d[0] - dot(l1, &d[1..])) / det;
                out[0] = x0;
                for i in 1..d.len() {
                    out[i] = (d[i] - x0 * lambda[i]) / l0;
                }
            }
            Kind::Psd(p) => {
                for j in 0..p {
                    let lj = lambda[svec_index(j, j)];
                    for i in 0..=j {
                        let li = lambda[svec_index(i, i)];
                        let k = svec_index(i, j);
                        out[k] = 2.0 * d[k] / (li + lj);
                    }
                }
            }
        }
    }

    /// Nesterov–Todd scaling for interior `s`, `z`; `None` if either is not interior.
    pub fn nt_scaling(&self, s: &[f64], z: &[f64]) -> Option<Scaling> {
        match self.kind {
            Kind::Nonneg => {
                let mut w = Vec::with_capacity(s.len());
                for (&a, &b) in s.iter().zip(z) {
                    if !(a > 0.0 && b > 0.0) {
                        return None;
                    }
                    w.push((a / b).sqrt());
                }
                Some(Scaling::Nonneg { w })
            }
            Kind::Soc => soc_scaling(s, z),
            Kind::Psd(p) => psd_scaling(s, z, p),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn soc_max_step(v: &[f64], dv: &[f64]) -> f64 {
    // f(α) = (v0 + α d0)² − ‖v1 + α d1‖² stays positive with v0 + α d0 > 0.
    let a = dv[0] * dv[0] - dot(&dv[1..], &dv[1..]);
    let b = 2.0 * (v[0] * dv[0] - dot(&v[1..], &dv[1..]));
    let c = v[0] * v[0] - dot(&v[1..], &v[1..]);
    let mut alpha = f64::INFINITY;
    if dv[0] < 0.0 {
        alpha = alpha.min(-v[0] / dv[0]);
    }
    let scale = a.abs().max(b.abs()).max(c.abs()).max(f64::MIN_POSITIVE);
    if a.abs() <= 1e-15 * scale {
        if b < 0.0 {
            alpha = alpha.min(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // numerically stable roots
            let q = -0.5 * (b + b.signum() * sq);
            let mut roots = [f64::INFINITY; 2];
            if q != 0.0 {
                roots[0] = q / a;
                roots[1] = c / q;
            } else {
                roots[0] = 0.0;
            }
            for r in roots {
                if r > 0.0 {
                    alpha = alpha.min(r);
                }
            }
        }
    }
    alpha.max(0.0)
}

fn soc_scaling(s: &[f64], z: &[f64]) -> Option<Scaling> {
    let k = s.len();
    let sn2 = s[0] * s[0] - dot(&s[1..], &s[1..]);
    let zn2 = z[0] * z[0] - dot(&z[1..], &z[1..]);
    if !(sn2 > 0.0 && zn2 > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
        return None;
    }
    let sn = sn2.sqrt();
    let zn = zn2.sqrt();
    let sb: Vec<f64> = s.iter().map(|x| x / sn).collect();
    let zb: Vec<f64> = z.iter().map(|x| x / zn).collect();
    let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
    let mut wb = vec![0.0; k];
    wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
    for i in 1..k {
        wb[i] = (sb[i] - zb[i]) / (2.0 * gamma);
    }
    let eta = (sn / zn).sqrt();
    let mut w = DMatrix::zeros(k, k);
    let mut winv = DMatrix::zeros(k, k);
    w[(0, 0)] = wb[0];
    winv[(0, 0)] = wb[0];
    for i in 1..k {
        w[(0, i)] = wb[i];
        w[(i, 0)] = wb[i];
        winv[(0, i)] = -wb[i];
        winv[(i, 0)] = -wb[i];
        for j in 1..k {
            let v = wb[i] * wb[j] / (1.0 + wb[0]) + if i == j { 1.0 } else { 0.0 };
            w[(i, j)] = v;
            winv[(i, j)] = v;
        }
    }
    Some(Scaling::Soc {
        w: w * eta,
        winv: winv / eta,
    })
}

fn psd_scaling(s: &[f64], z: &[f64], p: usize) -> Option<Scaling> {
    let ls = smat(s, p).cholesky()?.l();
    let lz = smat(z, p).cholesky()?.l();
    let m = lz.transpose() * &ls;
    let svd = m.svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let sig = svd.singular_values;
    if sig.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    // R = L_s V Σ^{-1/2},  R⁻¹ = Σ^{-1/2} Uᵀ L_zᵀ
    let mut r = ls * vt.transpose();
    let mut rinv = u.transpose() * lz.transpose();
    for k in 0..p {
        let f = sig[k].sqrt();
        r.column_mut(k).scale_mut(1.0 / f);
        rinv.row_mut(k).scale_mut(1.0 / f);
    }
    Some(Scaling::Psd { r, rinv })
}

/// Nesterov–Todd scaling of one block, satisfying `W z = W⁻ᵀ s = λ`.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    Nonneg { w: Vec<f64> },
    /// Symmetric `W` and its inverse.
    Soc { w: DMatrix<f64>, winv: DMatrix<f64> },
    /// `W(U) = Rᵀ U R`.
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    W,
    Wt,
    Winv,
    WinvT,
    /// `WᵀW`
    Gram,
}

fn congruence(t: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    // out = svec(T smat(v) Tᵀ)
    let p = t.nrows();
    let m = smat(v, p);
    let res = t * m * t.transpose();
    svec_into(&res, out);
}

impl Scaling {
    pub fn apply(&self, op: Op, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w } => {
                for ((o, x), wi) in out.iter_mut().zip(v).zip(w) {
                    *o = match op {
                        Op::W | Op::Wt => x * wi,
                        Op::Winv | Op::WinvT => x / wi,
                        Op::Gram => x * wi * wi,
                    };
                }
            }
            Scaling::Soc { w, winv } => {
                let k = v.len();
                let mut tmp = vec![0.0; k];
                let matvec = |m: &DMatrix<f64>, x: &[f64], y: &mut [f64]| {
                    for i in 0..k {
                        let mut acc = 0.0;
                        for j in 0..k {
                            acc += m[(i, j)] * x[j];
                        }
                        y[i] = acc;
                    }
                };
                match op {
                    Op::W | Op::Wt => matvec(w, v, out),
                    Op::Winv | Op::WinvT => matvec(winv, v, out),
                    Op::Gram => {
                        matvec(w, v, &mut tmp);
                        matvec(w, &tmp, out);
                    }
                }
            }
            Scaling::Psd { r, rinv } => match op {
                Op::W => congruence(&r.transpose(), v, out),
                Op::Wt => congruence(r, v, out),
                Op::Winv => congruence(&rinv.transpose(), v, out),
                Op::WinvT => congruence(rinv, v, out),
                Op::Gram => {
                    let rr = r * r.transpose();
                    congruence(&rr, v, out);
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior_soc(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        v[0] = norm(&v[1..]) + rng.gen_range(0.1..1.0);
        v
    }

    fn interior_psd(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
        let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
        let m = &a * a.transpose() + DMatrix::identity(p, p) * 0.1;
        let mut out = vec![0.0; p * (p + 1) / 2];
        svec_into(&m, &mut out);
        out
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn smat_svec_inverse_and_trace_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = interior_psd(&mut rng, 4);
        let v = interior_psd(&mut rng, 4);
        let tr = (smat(&u, 4) * smat(&v, 4)).trace();
        assert!((tr - dot(&u, &v)).abs() < 1e-12);
        let mut back = vec![0.0; u.len()];
        svec_into(&smat(&u, 4), &mut back);
        assert!(max_abs_diff(&u, &back) < 1e-14);
    }

    #[test]
    fn nt_scaling_maps_s_and_z_to_same_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cases = [
            (Cone { kind: Kind::Soc, offset: 0, dim: 5 }, true),
            (Cone { kind: Kind::Psd(3), offset: 0, dim: 6 }, false),
            (Cone { kind: Kind::Nonneg, offset: 0, dim: 4 }, false),
        ];
        for (cone, soc) in cases {
            for _ in 0..20 {
                let (s, z) = match cone.kind {
                    Kind::Soc => (interior_soc(&mut rng, 5), interior_soc(&mut rng, 5)),
                    Kind::Psd(p) => (interior_psd(&mut rng, p), interior_psd(&mut rng, p)),
                    Kind::Nonneg => (
                        (0..4).map(|_| rng.gen_range(0.1..2.0)).collect(),
                        (0..4).map(|_| rng.gen_range(0.1..2.0)).collect(),
                    ),
                };
                let w = cone.nt_scaling(&s, &z).unwrap();
                let mut wz = vec![0.0; cone.dim];
                let mut wits = vec![0.0; cone.dim];
                w.apply(Op::W, &z, &mut wz);
                w.apply(Op::WinvT, &s, &mut wits);
                assert!(max_abs_diff(&wz, &wits) < 1e-10, "soc={soc} {wz:?} {wits:?}");
                // W⁻ᵀ Wᵀ = I
                let mut wt = vec![0.0; cone.dim];
                let mut back = vec![0.0; cone.dim];
                w.apply(Op::Wt, &z, &mut wt);
                w.apply(Op::WinvT, &wt, &mut back);
                assert!(max_abs_diff(&back, &z) < 1e-10);
                // W⁻¹ W = I and Gram = Wᵀ W
                let mut wz2 = vec![0.0; cone.dim];
                w.apply(Op::Winv, &wz, &mut back);
                assert!(max_abs_diff(&back, &z) < 1e-9);
                let mut g = vec![0.0; cone.dim];
                w.apply(Op::Gram, &z, &mut g);
                w.apply(Op::Wt, &wz, &mut wz2);
                assert!(max_abs_diff(&g, &wz2) < 1e-9);
                // λ is diagonal for PSD blocks
                if let Kind::Psd(p) = cone.kind {
                    let l = smat(&wz, p);
                    for i in 0..p {
                        for j in 0..p {
                            if i != j {
                                assert!(l[(i, j)].abs() < 1e-10);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let soc = Cone { kind: Kind::Soc, offset: 0, dim: 4 };
        let l = interior_soc(&mut rng, 4);
        let d: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = vec![0.0; 4];
        soc.jordan_div(&l, &d, &mut x);
        let mut back = vec![0.0; 4];
        soc.jordan_prod(&l, &x, &mut back);
        assert!(max_abs_diff(&back, &d) < 1e-12);

        let psd = Cone { kind: Kind::Psd(3), offset: 0, dim: 6 };
        let mut lam = vec![0.0; 6];
        for (i, v) in [0.5, 1.5, 2.0].iter().enumerate() {
            lam[svec_index(i, i)] = *v;
        }
        let d: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = vec![0.0; 6];
        psd.jordan_div(&lam, &d, &mut x);
        let mut back = vec![0.0; 6];
        psd.jordan_prod(&lam, &x, &mut back);
        assert!(max_abs_diff(&back, &d) < 1e-12);
    }

    #[test]
    fn soc_step_hits_boundary() {
        let cone = Cone { kind: Kind::Soc, offset: 0, dim: 3 };
        let v = [2.0, 0.0, 0.0];
        let dv = [0.0, 1.0, 0.0];
        assert!((cone.max_step(&v, &dv) - 2.0).abs() < 1e-12);
        let dv = [1.0, 0.5, 0.0];
        assert!(cone.max_step(&v, &dv).is_infinite());
        let dv = [-1.0, 0.0, 0.0];
        assert!((cone.max_step(&v, &dv) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn psd_step_hits_boundary() {
        let cone = Cone { kind: Kind::Psd(2), offset: 0, dim: 3 };
        let mut x = vec![0.0; 3];
        svec_into(&DMatrix::identity(2, 2), &mut x);
        let mut d = vec![0.0; 3];
        svec_into(&DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]), &mut d);
        assert!((cone.max_step(&x, &d) - 0.5).abs() < 1e-12);
    }
}
