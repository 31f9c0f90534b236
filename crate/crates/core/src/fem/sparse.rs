//! Compressed sparse row operators and pattern-based assembly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Square or rectangular operator in CSR form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub symmetric: bool,
}

impl SparseOperator {
    /// Builds from unsorted triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of range");
            *rows[i].entry(j).or_insert(0.0) += v;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseOperator { nrows, ncols, row_ptr, col_idx, values, symmetric: false }
    }

    pub fn identity(n: usize) -> Self {
        SparseOperator {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), rows.first().map_or(0, Vec::len), &t)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let k = next[j];
                col_idx[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        SparseOperator {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// `self + scale * other`; patterns may differ.
    pub fn add_scaled(&self, other: &SparseOperator, scale: f64) -> SparseOperator {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, scale * v)));
        }
        let mut out = SparseOperator::from_triplets(self.nrows, self.ncols, &t);
        out.symmetric = self.symmetric && other.symmetric;
        out
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> f64 {
        let d = self.add_scaled(other, -1.0);
        d.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }
}

/// Symmetric elimination of Dirichlet constraints.
///
/// Constrained rows become identity rows with the prescribed value on the
/// right-hand side; constrained columns are moved to the right-hand side.
pub fn apply_dirichlet(
    op: &SparseOperator,
    rhs: &[f64],
    constraints: &[(usize, f64)],
) -> Result<(SparseOperator, Vec<f64>)> {
    assert_eq!(rhs.len(), op.nrows);
    let mut fixed: Vec<Option<f64>> = vec![None; op.nrows];
    for &(dof, value) in constraints {
        if dof >= op.nrows {
            return Err(Error::Config(format!("constraint on dof {dof} out of range {}", op.nrows)));
        }
        match fixed[dof] {
            Some(prev) if (prev - value).abs() > 1e-14 * prev.abs().max(1.0) => {
                return Err(Error::Config(format!(
                    "conflicting Dirichlet values {prev} and {value} on dof {dof}"
                )))
            }
            _ => fixed[dof] = Some(value),
        }
    }
    if constraints.is_empty() {
        return Ok((op.clone(), rhs.to_vec()));
    }
    let mut out_rhs = rhs.to_vec();
    let mut row_ptr = Vec::with_capacity(op.nrows + 1);
    let mut col_idx = Vec::with_capacity(op.nnz());
    let mut values = Vec::with_capacity(op.nnz());
    row_ptr.push(0);
    for i in 0..op.nrows {
        if let Some(g) = fixed[i] {
            col_idx.push(i);
            values.push(1.0);
            out_rhs[i] = g;
        } else {
            for (j, v) in op.row(i) {
                match fixed.get(j).copied().flatten() {
                    Some(g) => out_rhs[i] -= v * g,
                    None => {
                        col_idx.push(j);
                        values.push(v);
                    }
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    Ok((
        SparseOperator { nrows: op.nrows, ncols: op.ncols, row_ptr, col_idx, values, symmetric: op.symmetric },
        out_rhs,
    ))
}

/// Fixed sparsity pattern for element-wise assembly with a fixed number of
/// degrees of freedom per element.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    dofs_per_elem: usize,
    /// For element `e`, entry `(a, b)` lives at `positions[e * k * k + a * k + b]`.
    positions: Vec<u32>,
}

impl Pattern {
    pub fn new(n: usize, element_dofs: &[Vec<usize>]) -> Pattern {
        let k = element_dofs.first().map_or(0, Vec::len);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in element_dofs {
            assert_eq!(dofs.len(), k);
            for &a in dofs {
                rows[a].extend_from_slice(dofs);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let mut positions = Vec::with_capacity(element_dofs.len() * k * k);
        for dofs in element_dofs {
            for &a in dofs {
                let row = &col_idx[row_ptr[a]..row_ptr[a + 1]];
                for &b in dofs {
                    let off = row.binary_search(&b).expect("pattern entry");
                    positions.push((row_ptr[a] + off) as u32);
                }
            }
        }
        Pattern { n, row_ptr, col_idx, dofs_per_elem: k, positions }
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.col_idx.len()]
    }

    /// Adds a dense `k x k` element matrix (row-major) into `values`.
    #[inline]
    pub fn add_element(&self, values: &mut [f64], elem: usize, local: &[f64]) {
        let kk = self.dofs_per_elem * self.dofs_per_elem;
        let pos = &self.positions[elem * kk..(elem + 1) * kk];
        for (p, v) in pos.iter().zip(local) {
            values[*p as usize] += v;
        }
    }

    pub fn into_operator(&self, values: Vec<f64>, symmetric: bool) -> SparseOperator {
        SparseOperator {
            nrows: self.n,
            ncols: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
            symmetric,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseOperator::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.transpose().get(0, 1), -1.0);
    }

    #[test]
    fn no_constraints_is_identity_map() {
        let a = SparseOperator::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let (b, r) = apply_dirichlet(&a, &[1.0, 2.0], &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(r, vec![1.0, 2.0]);
    }

    #[test]
    fn elimination_lifts_rhs() {
        let a = SparseOperator::from_dense(&[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]);
        let (b, r) = apply_dirichlet(&a, &[0.0, 0.0, 0.0], &[(0, 1.0), (2, 3.0)]).unwrap();
        assert_eq!(b.to_dense(), vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(r, vec![1.0, 4.0, 3.0]);
    }

    #[test]
    fn conflicting_constraints() {
        let a = SparseOperator::identity(2);
        assert!(apply_dirichlet(&a, &[0.0, 0.0], &[(0, 1.0), (0, 1.0)]).is_ok());
        assert!(matches!(apply_dirichlet(&a, &[0.0, 0.0], &[(0, 1.0), (0, 2.0)]), Err(Error::Config(_))));
    }

    #[test]
    fn pattern_assembly_matches_triplets() {
        let elems = vec![vec![0, 1, 2], vec![1, 3, 2]];
        let p = Pattern::new(4, &elems);
        let mut vals = p.zeros();
        let mut trip = Vec::new();
        for (e, dofs) in elems.iter().enumerate() {
            let local: Vec<f64> = (0..9).map(|k| (k + 10 * e) as f64).collect();
            p.add_element(&mut vals, e, &local);
            for a in 0..3 {
                for b in 0..3 {
                    trip.push((dofs[a], dofs[b], local[3 * a + b]));
                }
            }
        }
        let a = p.into_operator(vals, false);
        let b = SparseOperator::from_triplets(4, 4, &trip);
        assert_eq!(a.to_dense(), b.to_dense());
    }
}
