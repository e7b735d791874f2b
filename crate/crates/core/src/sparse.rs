//! Compressed sparse row storage.
//!
//! Large systems are assembled into a precomputed pattern with
//! [`CsrMatrix::add`]; small ones can go through [`CsrMatrix::from_triplets`].

use rayon::prelude::*;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Row count above which matrix-vector products run in parallel.
const PAR_ROWS: usize = 20_000;

impl CsrMatrix {
    /// Zero matrix with the given sorted, deduplicated column lists per row.
    pub fn from_pattern(ncols: usize, rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Compresses `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if let Some(t) = triplets.iter().find(|t| t.0 >= nrows || t.1 >= ncols) {
            return Err(Error::Index(format!(
                "triplet ({}, {}) outside {nrows}x{ncols}",
                t.0, t.1
            )));
        }
        let mut sorted = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::identity(d.len());
        m.values.copy_from_slice(d);
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].binary_search(&c).ok().map(|p| a + p)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` to an entry of the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: f64) -> Result<()> {
        match self.position(r, c) {
            Some(p) => {
                self.values[p] += v;
                Ok(())
            }
            None => Err(Error::Index(format!("entry ({r}, {c}) not in sparsity pattern"))),
        }
    }

    /// Adds a dense row-major block over `dofs x dofs`.
    pub fn add_block(&mut self, dofs: &[usize], block: &[f64]) -> Result<()> {
        let n = dofs.len();
        debug_assert_eq!(block.len(), n * n);
        for (a, &r) in dofs.iter().enumerate() {
            let (start, end) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let cols = &self.col_idx[start..end];
            for (b, &c) in dofs.iter().enumerate() {
                let v = block[a * n + b];
                if v == 0.0 {
                    continue;
                }
                match cols.binary_search(&c) {
                    Ok(p) => self.values[start + p] += v,
                    Err(_) => {
                        return Err(Error::Index(format!("entry ({r}, {c}) not in sparsity pattern")))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let row = |r: usize| -> f64 {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            self.col_idx[a..b]
                .iter()
                .zip(&self.values[a..b])
                .map(|(&c, v)| v * x[c])
                .sum()
        };
        if self.nrows >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, yr)| *yr = row(r));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = row(r);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.get(r, r)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Restriction to the rows and columns listed in `keep`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.nrows];
        for (i, &k) in keep.iter().enumerate() {
            map[k] = i;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in keep {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if map[c] != usize::MAX {
                    col_idx.push(map[c]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: keep.len(),
            ncols: keep.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Row-major dense copy; intended for small test systems.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(r, c)] += v;
            }
        }
        d
    }

    pub(crate) fn zero_entry(&mut self, r: usize, c: usize) {
        if let Some(p) = self.position(r, c) {
            self.values[p] = 0.0;
        }
    }

    pub(crate) fn set_entry(&mut self, r: usize, c: usize, v: f64) -> Result<()> {
        match self.position(r, c) {
            Some(p) => {
                self.values[p] = v;
                Ok(())
            }
            None => Err(Error::Index(format!("entry ({r}, {c}) not in sparsity pattern"))),
        }
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> (&[usize], &mut [f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &mut self.values[a..b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 2.0]), vec![2.0, 2.0]);
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn pattern_rejects_outside_entries() {
        let mut m = CsrMatrix::from_pattern(3, vec![vec![0, 1], vec![0, 1], vec![2]]);
        m.add_block(&[0, 1], &[1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(m.get(1, 0), 2.0);
        assert!(m.add(0, 2, 1.0).is_err());
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn submatrix() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 4.0), (2, 0, 4.0)]).unwrap();
        let s = m.principal_submatrix(&[0, 2]);
        assert_eq!(s.to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 4.0, 3.0]));
    }
}
