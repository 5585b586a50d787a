//! Hermite polynomial chaos in `N` Gaussian variables.
//!
//! Polynomials are the probabilists' (unnormalized) Hermite family, so
//! `E[He_n^2] = n!` and the multivariate basis function `psi_i` has
//! `E[psi_i^2] = prod_d (i_d)!`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// `(n + p)! / (n! p!)`, or `None` on overflow.
pub fn basis_count(n: usize, p: usize) -> Option<usize> {
    let mut acc: u128 = 1;
    for t in 1..=p as u128 {
        acc = acc.checked_mul(n as u128 + t)? / t;
    }
    usize::try_from(acc).ok()
}

/// Graded set of multi-indices of total degree at most `degree`.
///
/// Indices are grouped by total degree; within a degree they are ordered
/// lexicographically descending, so index 0 is the zero tuple and the set for
/// a lower degree is always a prefix of the set for a higher one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexSet {
    dim: usize,
    degree: usize,
    indices: Vec<Vec<u32>>,
    /// `level_offsets[d]` is the position of the first index of total degree `d`.
    level_offsets: Vec<usize>,
}

impl MultiIndexSet {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "stochastic dimension must be at least 1".into(),
            ));
        }
        let total = basis_count(dim, degree).ok_or_else(|| {
            Error::InvalidArgument(format!("basis size overflows for N={dim}, P={degree}"))
        })?;
        if total > 10_000_000 {
            return Err(Error::InvalidArgument(format!(
                "basis of {total} polynomials is too large"
            )));
        }
        let mut indices = Vec::with_capacity(total);
        let mut level_offsets = Vec::with_capacity(degree + 2);
        let mut scratch = vec![0u32; dim];
        for d in 0..=degree {
            level_offsets.push(indices.len());
            compositions(d as u32, 0, &mut scratch, &mut indices);
        }
        level_offsets.push(indices.len());
        debug_assert_eq!(indices.len(), total);
        Ok(Self {
            dim,
            degree,
            indices,
            level_offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, i: usize) -> &[u32] {
        &self.indices[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.indices.iter().map(Vec::as_slice)
    }

    pub fn total_degree(&self, i: usize) -> usize {
        self.indices[i].iter().map(|&a| a as usize).sum()
    }

    /// Start offsets of each degree level plus the total count (length `degree + 2`).
    pub fn level_offsets(&self) -> &[usize] {
        &self.level_offsets
    }

    /// `E[psi_i^2]`.
    pub fn norm_squared(&self, i: usize) -> f64 {
        self.indices[i]
            .iter()
            .map(|&a| factorial(a as usize))
            .product()
    }

    /// `psi_i(xi)`.
    pub fn eval(&self, i: usize, xi: &[f64]) -> f64 {
        self.indices[i]
            .iter()
            .zip(xi)
            .map(|(&a, &x)| hermite(a as usize, x))
            .product()
    }

    /// All basis functions at `xi`, sharing the univariate evaluations.
    pub fn eval_all(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.dim, "xi length must equal N");
        let table: Vec<Vec<f64>> = xi
            .iter()
            .map(|&x| hermite_table(self.degree, x))
            .collect();
        self.indices
            .iter()
            .map(|idx| {
                idx.iter()
                    .enumerate()
                    .map(|(d, &a)| table[d][a as usize])
                    .product()
            })
            .collect()
    }
}

fn compositions(remaining: u32, pos: usize, scratch: &mut [u32], out: &mut Vec<Vec<u32>>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(scratch.to_vec());
        return;
    }
    for first in (0..=remaining).rev() {
        scratch[pos] = first;
        compositions(remaining - first, pos + 1, scratch, out);
    }
    scratch[pos] = 0;
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Probabilists' Hermite polynomial `He_n(x)` by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_0(x) ..= He_n(x)`.
pub fn hermite_table(n: usize, x: f64) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(1.0);
    if n >= 1 {
        t.push(x);
    }
    for k in 1..n {
        t.push(x * t[k] - k as f64 * t[k - 1]);
    }
    t
}

/// `E[He_a He_b He_c]` for a standard Gaussian.
pub fn triple_product_1d(a: usize, b: usize, c: usize) -> f64 {
    let sum = a + b + c;
    if sum % 2 == 1 || a > b + c || b > a + c || c > a + b {
        return 0.0;
    }
    let s = sum / 2;
    factorial(a) * factorial(b) * factorial(c)
        / (factorial(s - a) * factorial(s - b) * factorial(s - c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CijkEntry {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub value: f64,
}

/// Sparse third-order tensor `c_ijk = E[psi_i psi_j psi_k]`.
///
/// `i` runs over the coefficient basis (degree `P'`), `j` and `k` over the
/// solution basis (degree `P`). Only nonzero entries are stored, sorted by
/// `(i, j, k)`.
#[derive(Debug, Clone)]
pub struct CijkTensor {
    outer: usize,
    inner: usize,
    entries: Vec<CijkEntry>,
    /// `entries[i_offsets[i]..i_offsets[i + 1]]` holds the slice for `i`.
    i_offsets: Vec<usize>,
}

impl CijkTensor {
    /// Tensor for `i` over `coeff_basis` and `j, k` over `solution_basis`.
    pub fn build(coeff_basis: &MultiIndexSet, solution_basis: &MultiIndexSet) -> Result<Self> {
        if coeff_basis.dim() != solution_basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: solution_basis.dim(),
                found: coeff_basis.dim(),
            });
        }
        let pmax = coeff_basis.degree();
        let p = solution_basis.degree();
        let mut table = vec![0.0; (pmax + 1) * (p + 1) * (p + 1)];
        let at = |a: usize, b: usize, c: usize| (a * (p + 1) + b) * (p + 1) + c;
        for a in 0..=pmax {
            for b in 0..=p {
                for c in 0..=p {
                    table[at(a, b, c)] = triple_product_1d(a, b, c);
                }
            }
        }
        let mut entries = Vec::new();
        let mut i_offsets = Vec::with_capacity(coeff_basis.len() + 1);
        for (i, ii) in coeff_basis.iter().enumerate() {
            i_offsets.push(entries.len());
            let di = coeff_basis.total_degree(i);
            for (j, jj) in solution_basis.iter().enumerate() {
                let dj = solution_basis.total_degree(j);
                for (k, kk) in solution_basis.iter().enumerate() {
                    let dk = solution_basis.total_degree(k);
                    if (di + dj + dk) % 2 == 1 || di > dj + dk {
                        continue;
                    }
                    let mut v = 1.0;
                    for d in 0..ii.len() {
                        v *= table[at(ii[d] as usize, jj[d] as usize, kk[d] as usize)];
                        if v == 0.0 {
                            break;
                        }
                    }
                    if v != 0.0 {
                        entries.push(CijkEntry {
                            i: i as u32,
                            j: j as u32,
                            k: k as u32,
                            value: v,
                        });
                    }
                }
            }
        }
        i_offsets.push(entries.len());
        Ok(Self {
            outer: coeff_basis.len(),
            inner: solution_basis.len(),
            entries,
            i_offsets,
        })
    }

    /// `(M' + 1, M + 1, M + 1)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.outer, self.inner, self.inner)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[CijkEntry] {
        &self.entries
    }

    pub fn slice(&self, i: usize) -> &[CijkEntry] {
        &self.entries[self.i_offsets[i]..self.i_offsets[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        if i >= self.outer {
            return 0.0;
        }
        let s = self.slice(i);
        s.binary_search_by(|e| (e.j as usize, e.k as usize).cmp(&(j, k)))
            .map_or(0.0, |p| s[p].value)
    }

    /// `max_{j,k} |c_ijk|` for each `i`.
    pub fn max_per_index(&self) -> Vec<f64> {
        (0..self.outer)
            .map(|i| {
                self.slice(i)
                    .iter()
                    .fold(0.0_f64, |m, e| m.max(e.value.abs()))
            })
            .collect()
    }

    /// Dense `G_alpha(j, k) = c_{alpha j k}`.
    pub fn g_matrix(&self, alpha: usize) -> Result<DenseMatrix> {
        if alpha >= self.outer {
            return Err(Error::IndexOutOfRange {
                index: alpha,
                limit: self.outer,
            });
        }
        let mut g = DenseMatrix::zeros(self.inner, self.inner);
        for e in self.slice(alpha) {
            g[(e.j as usize, e.k as usize)] = e.value;
        }
        Ok(g)
    }

    /// Writes `i j k value` lines with 17 significant digits.
    pub fn write_triples<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for e in &self.entries {
            writeln!(out, "{} {} {} {:.16e}", e.i, e.j, e.k, e.value)?;
        }
        Ok(())
    }

    pub fn save_triples(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_triples(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads `i j k value` lines back into a list of entries.
    pub fn read_triples(text: &str) -> Result<Vec<CijkEntry>> {
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            let bad = || Error::Parse {
                line: n + 1,
                message: "expected 'i j k value'".into(),
            };
            if f.len() != 4 {
                return Err(bad());
            }
            out.push(CijkEntry {
                i: f[0].parse().map_err(|_| bad())?,
                j: f[1].parse().map_err(|_| bad())?,
                k: f[2].parse().map_err(|_| bad())?,
                value: f[3].parse().map_err(|_| bad())?,
            });
        }
        Ok(out)
    }
}

/// Convenience wrapper building both bases for `(N, P, P')`.
pub fn build_c_tensor(n: usize, p: usize, p_coeff: usize) -> Result<CijkTensor> {
    if p_coeff < p {
        return Err(Error::InvalidArgument(format!(
            "coefficient degree {p_coeff} below solution degree {p}"
        )));
    }
    let outer = MultiIndexSet::new(n, p_coeff)?;
    let inner = MultiIndexSet::new(n, p)?;
    CijkTensor::build(&outer, &inner)
}
