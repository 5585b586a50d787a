//! Banded direct solvers.
//!
//! Matrices are reordered with reverse Cuthill-McKee when that shrinks the
//! bandwidth, then factorized in band storage. Symmetric positive definite
//! input uses Cholesky; everything else (or a failed Cholesky) uses LU with
//! partial pivoting.

use crate::error::{Error, Result};

use super::{CsrMatrix, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    Lu,
}

#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    /// `perm[new] = old`; `None` for the identity ordering.
    perm: Option<Vec<usize>>,
    storage: Storage,
}

#[derive(Debug, Clone)]
enum Storage {
    Cholesky(BandCholesky),
    Lu(BandLu),
}

impl Factorization {
    /// Cholesky when `a` is symmetric and positive definite, LU otherwise.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.is_symmetric(1e-12) {
            match Self::with_kind(a, FactorKind::Cholesky) {
                Ok(f) => return Ok(f),
                Err(Error::NotPositiveDefinite { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Self::with_kind(a, FactorKind::Lu)
    }

    pub fn with_kind(a: &CsrMatrix, kind: FactorKind) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if kind == FactorKind::Cholesky {
            let asym = a.asymmetry();
            if asym > 1e-12 * a.max_abs().max(1.0) {
                return Err(Error::NotSymmetric { asymmetry: asym });
            }
        }
        let n = a.rows();
        let rcm = a.reverse_cuthill_mckee();
        let permuted = a.permute_symmetric(&rcm)?;
        let (matrix, perm) = if permuted.bandwidth() < a.bandwidth() {
            (permuted, Some(rcm))
        } else {
            (a.clone(), None)
        };
        let storage = match kind {
            FactorKind::Cholesky => Storage::Cholesky(BandCholesky::factor(&matrix)?),
            FactorKind::Lu => Storage::Lu(BandLu::factor(&matrix)?),
        };
        Ok(Self { n, perm, storage })
    }

    pub fn from_dense(a: &DenseMatrix) -> Result<Self> {
        Self::new(&CsrMatrix::from_dense(a, 0.0))
    }

    pub fn dense_with_kind(a: &DenseMatrix, kind: FactorKind) -> Result<Self> {
        Self::with_kind(&CsrMatrix::from_dense(a, 0.0), kind)
    }

    pub fn kind(&self) -> FactorKind {
        match self.storage {
            Storage::Cholesky(_) => FactorKind::Cholesky,
            Storage::Lu(_) => FactorKind::Lu,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        match &self.perm {
            None => self.solve_ordered(x),
            Some(perm) => {
                let mut y: Vec<f64> = perm.iter().map(|&old| x[old]).collect();
                self.solve_ordered(&mut y);
                for (new, &old) in perm.iter().enumerate() {
                    x[old] = y[new];
                }
            }
        }
        Ok(())
    }

    fn solve_ordered(&self, x: &mut [f64]) {
        match &self.storage {
            Storage::Cholesky(c) => c.solve(x),
            Storage::Lu(l) => l.solve(x),
        }
    }
}

/// Lower Cholesky factor in row band storage.
#[derive(Debug, Clone)]
struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (j + self.bw - i)
    }

    fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.rows();
        let bw = a.bandwidth();
        let mut f = Self {
            n,
            bw,
            l: vec![0.0; n * (bw + 1)],
        };
        for i in 0..n {
            for (j, v) in a.row_entries(i) {
                if j <= i {
                    let p = f.idx(i, j);
                    f.l[p] = v;
                }
            }
        }
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            let diag_in = f.l[f.idx(i, i)];
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let ri = f.idx(i, lo);
                let rj = f.idx(j, lo);
                let len = j - lo;
                let mut s = f.l[f.idx(i, j)];
                for k in 0..len {
                    s -= f.l[ri + k] * f.l[rj + k];
                }
                if j < i {
                    let d = f.l[f.idx(j, j)];
                    let p = f.idx(i, j);
                    f.l[p] = s / d;
                } else {
                    if !(s > f64::EPSILON * diag_in.abs()) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, value: s });
                    }
                    let p = f.idx(i, i);
                    f.l[p] = s.sqrt();
                }
            }
        }
        Ok(f)
    }

    fn solve(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = self.idx(i, lo);
            let mut s = x[i];
            for (k, xk) in x[lo..i].iter().enumerate() {
                s -= self.l[row + k] * xk;
            }
            x[i] = s / self.l[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            x[i] /= self.l[self.idx(i, i)];
            let xi = x[i];
            let lo = i.saturating_sub(bw);
            let row = self.idx(i, lo);
            for (k, xk) in x[lo..i].iter_mut().enumerate() {
                *xk -= self.l[row + k] * xi;
            }
        }
    }
}

/// LU with partial pivoting in row band storage (`kl` lower, `kl + ku` upper after pivoting).
#[derive(Debug, Clone)]
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, c: usize) -> usize {
        i * self.width() + (c + self.kl - i)
    }

    fn factor(m: &CsrMatrix) -> Result<Self> {
        let n = m.rows();
        let (mut kl, mut ku) = (0, 0);
        for i in 0..n {
            for (j, _) in m.row_entries(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let mut f = Self {
            n,
            kl,
            ku,
            a: vec![0.0; n * (2 * kl + ku + 1)],
            piv: vec![0; n],
        };
        for i in 0..n {
            for (j, v) in m.row_entries(i) {
                let p = f.idx(i, j);
                f.a[p] = v;
            }
        }
        let tol = (n as f64) * f64::EPSILON * m.max_abs();
        for col in 0..n {
            let last_row = (col + kl).min(n - 1);
            let last_col = (col + kl + ku).min(n - 1);
            let mut p = col;
            let mut best = f.a[f.idx(col, col)].abs();
            for r in (col + 1)..=last_row {
                let v = f.a[f.idx(r, col)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tol) {
                return Err(Error::Singular {
                    row: col,
                    value: best,
                });
            }
            f.piv[col] = p;
            if p != col {
                for c in col..=last_col {
                    let (x, y) = (f.idx(col, c), f.idx(p, c));
                    f.a.swap(x, y);
                }
            }
            let pivot = f.a[f.idx(col, col)];
            for r in (col + 1)..=last_row {
                let pr = f.idx(r, col);
                let factor = f.a[pr] / pivot;
                f.a[pr] = factor;
                if factor == 0.0 {
                    continue;
                }
                for c in (col + 1)..=last_col {
                    let (dst, src) = (f.idx(r, c), f.idx(col, c));
                    f.a[dst] -= factor * f.a[src];
                }
            }
        }
        Ok(f)
    }

    fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        for col in 0..n {
            let p = self.piv[col];
            if p != col {
                x.swap(col, p);
            }
            let xc = x[col];
            for r in (col + 1)..=(col + self.kl).min(n - 1) {
                x[r] -= self.a[self.idx(r, col)] * xc;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in (i + 1)..=(i + self.kl + self.ku).min(n - 1) {
                s -= self.a[self.idx(i, c)] * x[c];
            }
            x[i] = s / self.a[self.idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let f = Factorization::new(&CsrMatrix::identity(3)).unwrap();
        assert_eq!(f.kind(), FactorKind::Cholesky);
        assert_eq!(f.solve(&[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn scalar_solve() {
        let a = DenseMatrix::from_rows(&[vec![4.0]]).unwrap();
        let f = Factorization::from_dense(&a).unwrap();
        assert_eq!(f.solve(&[8.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn indefinite_symmetric_falls_back_to_lu() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = Factorization::from_dense(&a).unwrap();
        assert_eq!(f.kind(), FactorKind::Lu);
        assert_eq!(f.solve(&[2.0, 3.0]).unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let r = Factorization::dense_with_kind(&a, FactorKind::Cholesky);
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cholesky_rejects_nonsymmetric() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        let r = Factorization::dense_with_kind(&a, FactorKind::Cholesky);
        assert!(matches!(r, Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn lu_rejects_singular() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let r = Factorization::dense_with_kind(&a, FactorKind::Lu);
        assert!(matches!(r, Err(Error::Singular { .. })));
    }

    #[test]
    fn nonsymmetric_lu_needs_pivoting() {
        let a = DenseMatrix::from_rows(&[
            vec![1e-3, 2.0, 0.0],
            vec![3.0, 1.0, 1.0],
            vec![0.0, 4.0, -2.0],
        ])
        .unwrap();
        let f = Factorization::from_dense(&a).unwrap();
        assert_eq!(f.kind(), FactorKind::Lu);
        let b = [1.0, 2.0, 3.0];
        let x = f.solve(&b).unwrap();
        let r = a.matvec(&x).unwrap();
        for (ri, bi) in r.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }
}
