//! Standard-form cone programs.
//!
//! A [`ConicProgram`] describes
//!
//! ```text
//! minimize    cᵀx + c₀
//! subject to  A x = b
//!             h − G x ∈ K
//! ```
//!
//! where `K` is an ordered product of [`ConeBlock`]s that partition the rows of
//! `G`. Positive semidefinite blocks use the scaled lower-triangle-free `svec`
//! layout: the upper triangle is stored column by column and every
//! off-diagonal entry is multiplied by `√2`, so that `svec(U)ᵀ svec(V) = tr(UV)`.

use serde::{Deserialize, Serialize};

use crate::error::ConicError;

/// One factor of the product cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConeBlock {
    /// `{u : u ≥ 0}` of dimension `dim`.
    Nonneg { dim: usize },
    /// `{(t, u) : t ≥ ‖u‖₂}` of dimension `dim`.
    SecondOrder { dim: usize },
    /// `{(a, b, u) : 2ab ≥ ‖u‖², a ≥ 0, b ≥ 0}` of dimension `dim ≥ 3`.
    RotatedSecondOrder { dim: usize },
    /// Real symmetric positive semidefinite matrices of the given order, in `svec` layout.
    PsdReal { order: usize },
}

impl ConeBlock {
    /// Number of rows of `G` occupied by this block.
    pub fn dim(&self) -> usize {
        match *self {
            ConeBlock::Nonneg { dim }
            | ConeBlock::SecondOrder { dim }
            | ConeBlock::RotatedSecondOrder { dim } => dim,
            ConeBlock::PsdReal { order } => order * (order + 1) / 2,
        }
    }

    /// Barrier degree of the block.
    pub fn degree(&self) -> usize {
        match *self {
            ConeBlock::Nonneg { dim } => dim,
            ConeBlock::SecondOrder { .. } | ConeBlock::RotatedSecondOrder { .. } => 1,
            ConeBlock::PsdReal { order } => order,
        }
    }
}

/// Position of entry `(i, j)`, `i ≤ j`, inside an `svec` vector.
#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Row-compressed sparse matrix built from triplets; duplicates are summed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Explicit zeros that survive duplicate summation are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, ConicError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(ConicError::Malformed(format!(
                    "triplet ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(ConicError::Malformed(format!(
                    "non-finite coefficient at ({r}, {c})"
                )));
            }
            sorted.push((r, c, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut rows = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            if let (Some(&last_r), Some(&last_c)) = (rows.last(), col_idx.last()) {
                if last_r == r && last_c == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            values.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            out.extend(self.row(r).map(|(c, v)| (r, c, v)));
        }
        out
    }

    /// `y += alpha * M x`
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            *yr += alpha * acc;
        }
    }

    /// `y += alpha * Mᵀ x`
    pub fn mul_t_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (r, &xr) in x.iter().enumerate().take(self.nrows) {
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                y[c] += alpha * v * xr;
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SparseJson {
    nrows: usize,
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Serialize for SparseMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let t = self.triplets();
        SparseJson {
            nrows: self.nrows,
            ncols: self.ncols,
            rows: t.iter().map(|x| x.0).collect(),
            cols: t.iter().map(|x| x.1).collect(),
            vals: t.iter().map(|x| x.2).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SparseMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = SparseJson::deserialize(deserializer)?;
        if raw.rows.len() != raw.cols.len() || raw.rows.len() != raw.vals.len() {
            return Err(serde::de::Error::custom("triplet arrays differ in length"));
        }
        let t: Vec<_> = raw
            .rows
            .into_iter()
            .zip(raw.cols)
            .zip(raw.vals)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        SparseMatrix::from_triplets(raw.nrows, raw.ncols, &t).map_err(serde::de::Error::custom)
    }
}

/// A cone program in the form documented at module level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    #[serde(default)]
    pub objective_offset: f64,
    pub eq_matrix: SparseMatrix,
    pub eq_rhs: Vec<f64>,
    pub cone_matrix: SparseMatrix,
    pub cone_rhs: Vec<f64>,
    pub cones: Vec<ConeBlock>,
    /// Human-readable name of every variable.
    #[serde(default)]
    pub labels: Vec<String>,
}

impl ConicProgram {
    /// Total number of cone rows.
    pub fn cone_dim(&self) -> usize {
        self.cones.iter().map(ConeBlock::dim).sum()
    }

    /// Checks dimensions, finiteness and cone shapes.
    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.num_vars;
        let bad = |msg: String| Err(ConicError::Malformed(msg));
        if self.objective.len() != n {
            return bad(format!("objective has {} entries, expected {n}", self.objective.len()));
        }
        if !self.labels.is_empty() && self.labels.len() != n {
            return bad(format!("{} labels for {n} variables", self.labels.len()));
        }
        if self.eq_matrix.ncols() != n || self.cone_matrix.ncols() != n {
            return bad("constraint matrices do not match the variable count".into());
        }
        if self.eq_matrix.nrows() != self.eq_rhs.len() {
            return bad("equality rhs length mismatch".into());
        }
        if self.cone_matrix.nrows() != self.cone_rhs.len() {
            return bad("cone rhs length mismatch".into());
        }
        if self.cone_dim() != self.cone_rhs.len() {
            return bad(format!(
                "cone blocks cover {} rows but G has {}",
                self.cone_dim(),
                self.cone_rhs.len()
            ));
        }
        for block in &self.cones {
            match *block {
                ConeBlock::Nonneg { dim } | ConeBlock::SecondOrder { dim } if dim == 0 => {
                    return bad("empty cone block".into())
                }
                ConeBlock::RotatedSecondOrder { dim } if dim < 3 => {
                    return bad(format!("rotated cone of dimension {dim} (< 3)"))
                }
                ConeBlock::PsdReal { order } if order == 0 => {
                    return bad("PSD block of order 0".into())
                }
                _ => {}
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective)
            || !finite(&self.eq_rhs)
            || !finite(&self.cone_rhs)
            || !self.objective_offset.is_finite()
        {
            return bad("non-finite program data".into());
        }
        Ok(())
    }

    /// Row offset of each cone block.
    pub fn cone_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.cones.len());
        let mut acc = 0;
        for b in &self.cones {
            off.push(acc);
            acc += b.dim();
        }
        off
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("program serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ConicError> {
        let prog: ConicProgram =
            serde_json::from_str(text).map_err(|e| ConicError::Malformed(e.to_string()))?;
        prog.validate()?;
        Ok(prog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_layout_is_column_major_upper() {
        assert_eq!(svec_index(0, 0), 0);
        assert_eq!(svec_index(0, 1), 1);
        assert_eq!(svec_index(1, 1), 2);
        assert_eq!(svec_index(0, 2), 3);
        assert_eq!(svec_index(2, 1), 4);
        assert_eq!(svec_index(2, 2), 5);
    }

    #[test]
    fn triplets_are_summed_and_zeros_dropped() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            &[(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, 1.0), (0, 1, -1.0)],
        )
        .unwrap();
        assert_eq!(m.triplets(), vec![(0, 0, 2.0), (1, 2, 1.5)]);
        let mut y = vec![0.0; 2];
        m.mul_add(1.0, &[1.0, 1.0, 2.0], &mut y);
        assert_eq!(y, vec![2.0, 3.0]);
        let mut x = vec![0.0; 3];
        m.mul_t_add(2.0, &[1.0, 1.0], &mut x);
        assert_eq!(x, vec![4.0, 0.0, 3.0]);
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        assert!(SparseMatrix::from_triplets(1, 1, &[(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let prog = ConicProgram {
            num_vars: 2,
            objective: vec![1.0, -1.0],
            objective_offset: 0.5,
            eq_matrix: SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0)]).unwrap(),
            eq_rhs: vec![1.0],
            cone_matrix: SparseMatrix::from_triplets(3, 2, &[(0, 0, -1.0), (2, 1, 1.0)])
                .unwrap(),
            cone_rhs: vec![0.0, 1.0, 0.0],
            cones: vec![ConeBlock::Nonneg { dim: 1 }, ConeBlock::PsdReal { order: 1 },
                ConeBlock::Nonneg { dim: 1 }],
            labels: vec!["a".into(), "b".into()],
        };
        prog.validate().unwrap();
        let back = ConicProgram::from_json(&prog.to_json()).unwrap();
        assert_eq!(back, prog);
    }

    #[test]
    fn validate_catches_dimension_mismatch() {
        let prog = ConicProgram {
            num_vars: 1,
            objective: vec![1.0],
            objective_offset: 0.0,
            eq_matrix: SparseMatrix::zeros(0, 1),
            eq_rhs: vec![],
            cone_matrix: SparseMatrix::zeros(2, 1),
            cone_rhs: vec![0.0, 0.0],
            cones: vec![ConeBlock::Nonneg { dim: 1 }],
            labels: vec![],
        };
        assert!(prog.validate().is_err());
    }
}
