//! Compressed sparse row matrices assembled from coordinate triplets.

use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Coordinate-format accumulator. Duplicate entries are summed on compression.
#[derive(Debug, Clone)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, other: Triplets) {
        debug_assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorts by (row, col) and sums duplicates. Explicit zeros are kept so the
    /// pattern does not depend on cancellation.
    pub fn into_csr(mut self) -> CsrMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Triplets::new(nrows, ncols).into_csr()
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut t = Triplets::with_capacity(diag.len(), diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            t.push(i, i, d);
        }
        t.into_csr()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of one row as (col, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Triplets::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.iter() {
            t.push(j, i, v);
        }
        t.into_csr()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `self * other` with a dense right factor.
    pub fn mul_dense(&self, other: &Mat<f64>) -> Mat<f64> {
        assert_eq!(other.nrows(), self.ncols);
        let mut out = Mat::<f64>::zeros(self.nrows, other.ncols());
        for k in 0..other.ncols() {
            let col = other.col(k);
            for i in 0..self.nrows {
                let mut s = 0.0;
                for (j, v) in self.row(i) {
                    s += v * col[j];
                }
                out[(i, k)] = s;
            }
        }
        out
    }

    pub fn mul_sparse(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Triplets::new(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    t.push(i, j, a * b);
                }
            }
        }
        t.into_csr()
    }

    /// Multiplies row `i` by `scale[i]`.
    pub fn scale_rows(&self, scale: &[f64]) -> CsrMatrix {
        assert_eq!(scale.len(), self.nrows);
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.values[k] *= scale[i];
            }
        }
        out
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.shape(), other.shape());
        let mut t = Triplets::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for (i, j, v) in self.iter() {
            t.push(i, j, v);
        }
        for (i, j, v) in other.iter() {
            t.push(i, j, alpha * v);
        }
        t.into_csr()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let trip: Vec<_> = self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .expect("csr indices are in bounds")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|`. Panics on a non-square matrix.
    pub fn symmetry_residual(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols, "symmetry residual of a non-square matrix");
        let diff = self.add_scaled(-1.0, &self.transpose());
        diff.max_abs()
    }

    /// Writes `%%MatrixMarket matrix coordinate real general`.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

/// Dense Matrix Market export, used for the Schur pencil blocks.
pub fn write_dense_matrix_market<W: Write>(m: &Mat<f64>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    let nnz = (0..m.ncols())
        .map(|j| (0..m.nrows()).filter(|&i| m[(i, j)] != 0.0).count())
        .sum::<usize>();
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), nnz)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut t = Triplets::new(2, 3);
        t.push(1, 2, 1.5);
        t.push(0, 0, 1.0);
        t.push(1, 2, 2.0);
        let m = t.into_csr();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 3.5);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let mut a = Triplets::new(3, 2);
        a.push(0, 0, 1.0);
        a.push(2, 1, -2.0);
        a.push(1, 0, 4.0);
        let a = a.into_csr();
        let b = a.transpose();
        let ab = a.mul_sparse(&b).to_dense();
        let dense = a.to_dense();
        let expect = &dense * dense.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(ab[(i, j)], expect[(i, j)]);
            }
        }
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![1.0, 4.0, -2.0]);
        assert_eq!(a.symmetry_residual_safe(), None);
    }

    impl CsrMatrix {
        fn symmetry_residual_safe(&self) -> Option<f64> {
            (self.nrows == self.ncols).then(|| self.symmetry_residual())
        }
    }

    #[test]
    fn matrix_market_header() {
        let m = CsrMatrix::from_diagonal(&[1.0, 2.0]);
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n"));
    }
}
