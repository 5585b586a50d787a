//! The global stochastic Galerkin operator, applied block-wise without assembly.
//!
//! The global matrix has `(M+1) x (M+1)` blocks `K^(j,k) = sum_i c_ijk K_i`.
//! Blocks are grouped into levels by the total degree of their chaos index,
//! which gives the hierarchical splitting used by the preconditioners.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use crate::chaos::{CijkTensor, MultiIndexSet};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseMatrix, Factorization, LinearOperator};

/// Block offsets of each polynomial degree level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMap {
    offsets: Vec<usize>,
}

impl LevelMap {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        Ok(Self::from_basis(&MultiIndexSet::new(n, p)?))
    }

    pub fn from_basis(basis: &MultiIndexSet) -> Self {
        Self {
            offsets: basis.level_offsets().to_vec(),
        }
    }

    /// Number of levels, `P + 1`.
    pub fn num_levels(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Total number of blocks, `M + 1`.
    pub fn num_blocks(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Block indices of level `l`.
    pub fn range(&self, l: usize) -> Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }

    pub fn size(&self, l: usize) -> usize {
        self.offsets[l + 1] - self.offsets[l]
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.num_levels()).map(|l| self.size(l)).collect()
    }

    pub fn level_of(&self, block: usize) -> usize {
        self.offsets.partition_point(|&o| o <= block) - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationKind {
    Full,
    /// All coefficient indices of total degree at most `level`.
    Standard { level: usize },
    /// Indices whose weighted norm reaches `tau`.
    Adaptive { tau: f64 },
}

impl std::fmt::Display for TruncationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TruncationKind::Full => write!(f, "full"),
            TruncationKind::Standard { level } => write!(f, "lt={level}"),
            TruncationKind::Adaptive { tau } => write!(f, "tau={tau}"),
        }
    }
}

/// Subset of stiffness-matrix indices kept in truncated block products.
///
/// Index 0 is always retained; indices are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSet {
    indices: Vec<usize>,
    kind: TruncationKind,
}

impl TruncationSet {
    pub fn full(num_coeffs: usize) -> Self {
        Self {
            indices: (0..num_coeffs).collect(),
            kind: TruncationKind::Full,
        }
    }

    /// First `(N + lt)! / (N! lt!)` indices, capped at `num_coeffs`.
    pub fn standard(n: usize, level: usize, num_coeffs: usize) -> Result<Self> {
        let count = crate::chaos::basis_count(n, level)
            .ok_or_else(|| Error::InvalidArgument("truncation size overflows".into()))?;
        Ok(Self {
            indices: (0..count.min(num_coeffs)).collect(),
            kind: TruncationKind::Standard { level },
        })
    }

    /// `{0} ∪ {i : max_jk |c_ijk| * norms[i] >= tau}`.
    pub fn adaptive(tau: f64, norms: &[f64], tensor: &CijkTensor) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be >= 0, got {tau}")));
        }
        if norms.len() != tensor.dims().0 {
            return Err(Error::DimensionMismatch {
                expected: tensor.dims().0,
                found: norms.len(),
            });
        }
        let maxc = tensor.max_per_index();
        let indices = (0..norms.len())
            .filter(|&i| i == 0 || maxc[i] * norms[i] >= tau)
            .collect();
        Ok(Self {
            indices,
            kind: TruncationKind::Adaptive { tau },
        })
    }

    /// Arbitrary subset; index 0 is added if missing.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.push(0);
        indices.sort_unstable();
        indices.dedup();
        Self {
            indices,
            kind: TruncationKind::Full,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn kind(&self) -> TruncationKind {
        self.kind
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Number of tensor entries `c_ijk` with `i` in the set.
    pub fn tensor_nnz(&self, tensor: &CijkTensor) -> usize {
        self.indices
            .iter()
            .filter(|&&i| i < tensor.dims().0)
            .map(|&i| tensor.slice(i).len())
            .sum()
    }
}

/// Counters of the work done in block products.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatvecStats {
    /// `K_i v` products actually computed.
    pub products: u64,
    /// Accumulations `w_j += c_ijk (K_i v_k)`, one per tensor entry touched.
    pub summations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    #[default]
    Frobenius,
    /// Spectral norm estimated by power iteration.
    Two,
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frob" | "frobenius" => Ok(NormKind::Frobenius),
            "two" | "2" => Ok(NormKind::Two),
            other => Err(Error::InvalidArgument(format!("unknown norm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct IkEntry {
    k: u32,
    j: u32,
    value: f64,
}

/// Matrix-free stochastic Galerkin operator.
#[derive(Debug)]
pub struct GalerkinOperator {
    stiffness: Vec<CsrMatrix>,
    tensor: CijkTensor,
    basis: MultiIndexSet,
    levels: LevelMap,
    n_dof: usize,
    full: TruncationSet,
    /// Tensor entries per `i`, sorted by `(k, j)` so that `K_i v_k` is formed once.
    by_ik: Vec<Vec<IkEntry>>,
    products: AtomicU64,
    summations: AtomicU64,
    mean_factor: OnceLock<Factorization>,
    diag_factors: Vec<OnceLock<Factorization>>,
    level_factors: Vec<OnceLock<Factorization>>,
}

impl GalerkinOperator {
    /// `stiffness[i]` pairs with coefficient index `i` of `tensor`; `basis` is
    /// the solution chaos basis indexing the blocks.
    pub fn new(stiffness: Vec<CsrMatrix>, tensor: CijkTensor, basis: MultiIndexSet) -> Result<Self> {
        let (outer, inner, _) = tensor.dims();
        if stiffness.len() != outer {
            return Err(Error::DimensionMismatch {
                expected: outer,
                found: stiffness.len(),
            });
        }
        if basis.len() != inner {
            return Err(Error::DimensionMismatch {
                expected: inner,
                found: basis.len(),
            });
        }
        let first = stiffness
            .first()
            .ok_or_else(|| Error::InvalidArgument("no stiffness matrices".into()))?;
        if first.rows() != first.cols() {
            return Err(Error::NotSquare {
                rows: first.rows(),
                cols: first.cols(),
            });
        }
        if let Some(bad) = stiffness.iter().position(|k| !k.same_pattern(first)) {
            return Err(Error::InvalidArgument(format!(
                "stiffness matrix {bad} does not share the sparsity pattern of K_0"
            )));
        }
        let n_dof = first.rows();
        let by_ik = (0..outer)
            .map(|i| {
                let mut v: Vec<IkEntry> = tensor
                    .slice(i)
                    .iter()
                    .map(|e| IkEntry {
                        k: e.k,
                        j: e.j,
                        value: e.value,
                    })
                    .collect();
                v.sort_by_key(|e| (e.k, e.j));
                v
            })
            .collect();
        let levels = LevelMap::from_basis(&basis);
        let num_levels = levels.num_levels();
        Ok(Self {
            stiffness,
            full: TruncationSet::full(outer),
            tensor,
            basis,
            levels,
            n_dof,
            by_ik,
            products: AtomicU64::new(0),
            summations: AtomicU64::new(0),
            mean_factor: OnceLock::new(),
            diag_factors: (0..inner).map(|_| OnceLock::new()).collect(),
            level_factors: (0..num_levels).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn num_blocks(&self) -> usize {
        self.levels.num_blocks()
    }

    /// Number of stiffness matrices, `M' + 1`.
    pub fn num_coeffs(&self) -> usize {
        self.stiffness.len()
    }

    pub fn global_dim(&self) -> usize {
        self.num_blocks() * self.n_dof
    }

    pub fn stiffness(&self, i: usize) -> &CsrMatrix {
        &self.stiffness[i]
    }

    pub fn stiffness_all(&self) -> &[CsrMatrix] {
        &self.stiffness
    }

    pub fn tensor(&self) -> &CijkTensor {
        &self.tensor
    }

    pub fn basis(&self) -> &MultiIndexSet {
        &self.basis
    }

    pub fn levels(&self) -> &LevelMap {
        &self.levels
    }

    pub fn full_truncation(&self) -> &TruncationSet {
        &self.full
    }

    /// Degree-of-freedom range of block `j` in a global vector.
    pub fn block_dofs(&self, j: usize) -> Range<usize> {
        j * self.n_dof..(j + 1) * self.n_dof
    }

    /// Degree-of-freedom range of a contiguous set of blocks.
    pub fn blocks_dofs(&self, blocks: &Range<usize>) -> Range<usize> {
        blocks.start * self.n_dof..blocks.end * self.n_dof
    }

    pub fn stats(&self) -> MatvecStats {
        MatvecStats {
            products: self.products.load(Ordering::Relaxed),
            summations: self.summations.load(Ordering::Relaxed),
        }
    }

    pub fn reset_stats(&self) {
        self.products.store(0, Ordering::Relaxed);
        self.summations.store(0, Ordering::Relaxed);
    }

    /// Truncated block product `w_(j) = sum_{k in cols} sum_{i in trunc} c_ijk K_i v_(k)`
    /// for `j in rows`.
    ///
    /// `v` holds the `cols` blocks and `w` the `rows` blocks, both contiguous.
    pub fn tmatvec(
        &self,
        rows: Range<usize>,
        cols: Range<usize>,
        trunc: &TruncationSet,
        v: &[f64],
        w: &mut [f64],
    ) -> Result<()> {
        w.iter_mut().for_each(|x| *x = 0.0);
        self.tmatvec_acc(1.0, rows, cols, trunc, v, w)
    }

    /// `w += alpha * tmatvec(rows, cols, trunc, v)`.
    pub fn tmatvec_acc(
        &self,
        alpha: f64,
        rows: Range<usize>,
        cols: Range<usize>,
        trunc: &TruncationSet,
        v: &[f64],
        w: &mut [f64],
    ) -> Result<()> {
        let nd = self.n_dof;
        let nb = self.num_blocks();
        if rows.end > nb || cols.end > nb {
            return Err(Error::IndexOutOfRange {
                index: rows.end.max(cols.end),
                limit: nb,
            });
        }
        if v.len() != cols.len() * nd {
            return Err(Error::DimensionMismatch {
                expected: cols.len() * nd,
                found: v.len(),
            });
        }
        if w.len() != rows.len() * nd {
            return Err(Error::DimensionMismatch {
                expected: rows.len() * nd,
                found: w.len(),
            });
        }
        let (r0, r1) = (rows.start as u32, rows.end as u32);
        let (c0, c1) = (cols.start as u32, cols.end as u32);
        let mut t = vec![0.0; nd];
        let (mut products, mut summations) = (0u64, 0u64);
        for &i in trunc.indices() {
            let Some(entries) = self.by_ik.get(i) else {
                continue;
            };
            let ki = &self.stiffness[i];
            let start = entries.partition_point(|e| e.k < c0);
            let mut p = start;
            while p < entries.len() && entries[p].k < c1 {
                let k = entries[p].k;
                let mut q = p;
                while q < entries.len() && entries[q].k == k {
                    q += 1;
                }
                let run = &entries[p..q];
                p = q;
                let lo = run.partition_point(|e| e.j < r0);
                let hi = run.partition_point(|e| e.j < r1);
                if lo == hi {
                    continue;
                }
                let kk = (k - c0) as usize;
                ki.spmv_into(&v[kk * nd..(kk + 1) * nd], &mut t)?;
                products += 1;
                for e in &run[lo..hi] {
                    let jj = (e.j - r0) as usize;
                    let s = alpha * e.value;
                    for (wi, ti) in w[jj * nd..(jj + 1) * nd].iter_mut().zip(&t) {
                        *wi += s * ti;
                    }
                    summations += 1;
                }
            }
        }
        self.products.fetch_add(products, Ordering::Relaxed);
        self.summations.fetch_add(summations, Ordering::Relaxed);
        Ok(())
    }

    /// Full product `A v`.
    pub fn matvec(&self, v: &[f64], w: &mut [f64]) -> Result<()> {
        let nb = self.num_blocks();
        self.tmatvec(0..nb, 0..nb, &self.full, v, w)
    }

    /// `K^(j,k) = sum_i c_ijk K_i` over all coefficient indices.
    pub fn assemble_block(&self, j: usize, k: usize) -> Result<CsrMatrix> {
        let nb = self.num_blocks();
        if j >= nb || k >= nb {
            return Err(Error::IndexOutOfRange {
                index: j.max(k),
                limit: nb,
            });
        }
        let mut values = vec![0.0; self.stiffness[0].nnz()];
        for (i, ki) in self.stiffness.iter().enumerate() {
            let c = self.tensor.get(i, j, k);
            if c != 0.0 {
                for (a, b) in values.iter_mut().zip(ki.values()) {
                    *a += c * b;
                }
            }
        }
        self.stiffness[0].with_values(values)
    }

    /// Diagonal block `K^(j,j)`, always with the untruncated sum.
    pub fn assemble_diag_block(&self, j: usize) -> Result<CsrMatrix> {
        self.assemble_block(j, j)
    }

    /// Level block `D_l`: all blocks `K^(j,k)` with `j, k` in level `l`, block-major.
    pub fn assemble_level_block(&self, l: usize) -> Result<CsrMatrix> {
        if l >= self.levels.num_levels() {
            return Err(Error::IndexOutOfRange {
                index: l,
                limit: self.levels.num_levels(),
            });
        }
        let range = self.levels.range(l);
        let nb = range.len();
        let nd = self.n_dof;
        let pattern = &self.stiffness[0];
        let mut blocks: Vec<Option<CsrMatrix>> = Vec::with_capacity(nb * nb);
        for j in range.clone() {
            for k in range.clone() {
                let nonzero = (0..self.num_coeffs()).any(|i| self.tensor.get(i, j, k) != 0.0);
                blocks.push(if nonzero {
                    Some(self.assemble_block(j, k)?)
                } else {
                    None
                });
            }
        }
        let mut row_ptr = Vec::with_capacity(nb * nd + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for a in 0..nb {
            for r in 0..nd {
                let span = pattern.row_ptr()[r]..pattern.row_ptr()[r + 1];
                for b in 0..nb {
                    if let Some(block) = &blocks[a * nb + b] {
                        for p in span.clone() {
                            col_idx.push(b * nd + pattern.col_idx()[p]);
                            values.push(block.values()[p]);
                        }
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        CsrMatrix::new(nb * nd, nb * nd, row_ptr, col_idx, values)
    }

    /// Explicit global matrix for verification on small instances.
    pub fn assemble_global_dense(&self, cap: usize) -> Result<DenseMatrix> {
        let dim = self.global_dim();
        if dim > cap {
            return Err(Error::CapExceeded { required: dim, cap });
        }
        let nd = self.n_dof;
        let mut a = DenseMatrix::zeros(dim, dim);
        for e in self.tensor.entries() {
            let ki = &self.stiffness[e.i as usize];
            let (j, k) = (e.j as usize, e.k as usize);
            for r in 0..nd {
                for (c, v) in ki.row_entries(r) {
                    a[(j * nd + r, k * nd + c)] += e.value * v;
                }
            }
        }
        Ok(a)
    }

    /// Cached factorization of the mean stiffness matrix `K_0`.
    pub fn mean_factor(&self) -> Result<&Factorization> {
        cached(&self.mean_factor, || Factorization::new(&self.stiffness[0]))
    }

    /// Cached factorization of `K^(j,j)`.
    pub fn diag_factor(&self, j: usize) -> Result<&Factorization> {
        let cell = self.diag_factors.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            limit: self.num_blocks(),
        })?;
        cached(cell, || Factorization::new(&self.assemble_diag_block(j)?))
    }

    /// Cached factorization of the level block `D_l`.
    pub fn level_factor(&self, l: usize) -> Result<&Factorization> {
        let cell = self.level_factors.get(l).ok_or(Error::IndexOutOfRange {
            index: l,
            limit: self.levels.num_levels(),
        })?;
        cached(cell, || Factorization::new(&self.assemble_level_block(l)?))
    }

    /// Norms of every stiffness matrix.
    pub fn stiffness_norms(&self, kind: NormKind) -> Vec<f64> {
        self.stiffness
            .iter()
            .map(|k| match kind {
                NormKind::Frobenius => k.frobenius_norm(),
                NormKind::Two => spectral_norm(k),
            })
            .collect()
    }

    /// Weights `tr(K_a^T K_0) / tr(K_0^T K_0)` of the Kronecker preconditioner.
    pub fn kronecker_weights(&self) -> Vec<f64> {
        let k0 = &self.stiffness[0];
        let denom = k0.frobenius_dot(k0).expect("shared pattern");
        self.stiffness
            .iter()
            .map(|k| k.frobenius_dot(k0).expect("shared pattern") / denom)
            .collect()
    }

    /// Global right-hand side for a deterministic spatial load: only block 0 is nonzero.
    pub fn deterministic_rhs(&self, load: &[f64]) -> Result<Vec<f64>> {
        if load.len() != self.n_dof {
            return Err(Error::DimensionMismatch {
                expected: self.n_dof,
                found: load.len(),
            });
        }
        let mut b = vec![0.0; self.global_dim()];
        b[..self.n_dof].copy_from_slice(load);
        Ok(b)
    }
}

fn cached<'a>(
    cell: &'a OnceLock<Factorization>,
    build: impl FnOnce() -> Result<Factorization>,
) -> Result<&'a Factorization> {
    if let Some(f) = cell.get() {
        return Ok(f);
    }
    let f = build()?;
    Ok(cell.get_or_init(|| f))
}

/// Largest absolute eigenvalue of a symmetric matrix by power iteration.
pub fn spectral_norm(a: &CsrMatrix) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 0.0;
    }
    // deterministic, non-symmetric start vector
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let mut y = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..500 {
        let nx = crate::linalg::norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        a.spmv_into(&x, &mut y).expect("square");
        let next = crate::linalg::norm2(&y);
        std::mem::swap(&mut x, &mut y);
        if (next - estimate).abs() <= 1e-10 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

impl LinearOperator for GalerkinOperator {
    fn dim(&self) -> usize {
        self.global_dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y).expect("global operator dimension");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_sizes() {
        let l = LevelMap::new(4, 4).unwrap();
        assert_eq!(l.sizes(), vec![1, 4, 10, 20, 35]);
        assert_eq!(l.offsets(), &[0, 1, 5, 15, 35, 70]);
        assert_eq!(l.num_blocks(), 70);
        assert_eq!(LevelMap::new(1, 3).unwrap().sizes(), vec![1, 1, 1, 1]);
        assert_eq!(l.level_of(0), 0);
        assert_eq!(l.level_of(4), 1);
        assert_eq!(l.level_of(5), 2);
        assert_eq!(l.level_of(69), 4);
    }

    #[test]
    fn standard_truncation_sizes() {
        assert_eq!(TruncationSet::standard(4, 2, 495).unwrap().len(), 15);
        assert_eq!(TruncationSet::standard(4, 0, 495).unwrap().indices(), &[0]);
        assert_eq!(TruncationSet::standard(4, 8, 495).unwrap().len(), 495);
    }

    #[test]
    fn adaptive_truncation_limits() {
        let t = crate::chaos::build_c_tensor(2, 1, 2).unwrap();
        let norms = vec![3.0, 1.0, 0.5, 0.1, 0.2, 0.1];
        assert_eq!(TruncationSet::adaptive(0.0, &norms, &t).unwrap().len(), 6);
        assert_eq!(
            TruncationSet::adaptive(f64::INFINITY, &norms, &t).unwrap().indices(),
            &[0]
        );
        assert!(TruncationSet::adaptive(-1.0, &norms, &t).is_err());
    }
}
