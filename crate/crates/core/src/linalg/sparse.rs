use crate::error::{Error, Result};

use super::DenseMatrix;

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row. Explicit zeros are
/// allowed so that families of matrices can share one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 {
            return Err(Error::DimensionMismatch {
                expected: rows + 1,
                found: row_ptr.len(),
            });
        }
        if col_idx.len() != values.len() || row_ptr[rows] != col_idx.len() || row_ptr[0] != 0 {
            return Err(Error::InvalidArgument(
                "inconsistent CSR array lengths".into(),
            ));
        }
        for r in 0..rows {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(Error::InvalidArgument("row offsets decrease".into()));
            }
            let cols_r = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols_r.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "column indices not strictly increasing in row {r}"
                )));
            }
            if let Some(&c) = cols_r.last() {
                if c >= cols {
                    return Err(Error::IndexOutOfRange {
                        index: c,
                        limit: cols,
                    });
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        for &(r, c, _) in triplets {
            if r >= rows {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    limit: rows,
                });
            }
            if c >= cols {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    limit: cols,
                });
            }
        }
        // stable sort keeps duplicate summation order deterministic
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for t in order {
            let (r, c, v) = triplets[t];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Keeps every entry of `dense` whose magnitude exceeds `drop_tol`.
    pub fn from_dense(dense: &DenseMatrix, drop_tol: f64) -> Self {
        let mut row_ptr = Vec::with_capacity(dense.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..dense.rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v.abs() > drop_tol {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: dense.rows(),
            cols: dense.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Same pattern as `self`, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            values,
            ..self.clone_pattern()
        })
    }

    fn clone_pattern(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Position of `(i, j)` in the value array, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .binary_search(&j)
            .ok()
            .map(|p| span.start + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x` with left-to-right summation within each row.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_dims(x, y)?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
        Ok(())
    }

    /// `y += alpha A x`.
    pub fn spmv_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_dims(x, y)?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += alpha * self.row_dot(i, x);
        }
        Ok(())
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .zip(&self.values[span])
            .fold(0.0, |acc, (&c, &v)| acc + v * x[c])
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: y.len(),
            });
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                let p = next[j];
                col_idx[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Largest `|a_ij - a_ji|` over stored entries and their mirrors.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol * self.max_abs().max(1.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a + v * v).sqrt()
    }

    /// `tr(A^T B)` for two matrices on the same pattern.
    pub fn frobenius_dot(&self, other: &CsrMatrix) -> Result<f64> {
        if !self.same_pattern(other) {
            return Err(Error::InvalidArgument(
                "frobenius_dot requires a shared sparsity pattern".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |a, (x, y)| a + x * y))
    }

    /// Half bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.rows {
            for (j, _) in self.row_entries(i) {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    /// Symmetric permutation `B[a][b] = A[perm[a]][perm[b]]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<CsrMatrix> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if perm.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: perm.len(),
            });
        }
        let mut inverse = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for &old in perm {
            scratch.clear();
            scratch.extend(self.row_entries(old).map(|(j, v)| (inverse[j], v)));
            scratch.sort_by_key(|e| e.0);
            for &(j, v) in &scratch {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Reverse Cuthill-McKee ordering of the symmetrized adjacency graph.
    ///
    /// Returns `perm` with `perm[new] = old`.
    pub fn reverse_cuthill_mckee(&self) -> Vec<usize> {
        let n = self.rows;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            for (j, _) in self.row_entries(i) {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let start = (0..n)
                .filter(|&v| !visited[v])
                .min_by_key(|&v| (degree[v], v))
                .unwrap();
            visited[start] = true;
            let mut head = order.len();
            order.push(start);
            while head < order.len() {
                let v = order[head];
                head += 1;
                let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
                next.sort_by_key(|&u| (degree[u], u));
                for u in next {
                    visited[u] = true;
                    order.push(u);
                }
            }
        }
        order.reverse();
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spmv() {
        let a = CsrMatrix::identity(2);
        assert_eq!(a.spmv(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn zero_matrix_spmv() {
        let a = CsrMatrix::zeros(3, 2);
        assert_eq!(a.spmv(&[5.0, -1.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(
            a.spmv(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn rejects_unsorted_columns() {
        let r = CsrMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 0.5)]).unwrap();
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn rcm_reduces_bandwidth_of_scrambled_path() {
        // path graph 0-4-1-3-2 stored in scrambled order
        let edges = [(0, 4), (4, 1), (1, 3), (3, 2)];
        let mut t = Vec::new();
        for i in 0..5 {
            t.push((i, i, 2.0));
        }
        for &(a, b) in &edges {
            t.push((a, b, -1.0));
            t.push((b, a, -1.0));
        }
        let a = CsrMatrix::from_triplets(5, 5, &t).unwrap();
        let perm = a.reverse_cuthill_mckee();
        let b = a.permute_symmetric(&perm).unwrap();
        assert_eq!(b.bandwidth(), 1);
        assert!(a.bandwidth() > 1);
    }
}
