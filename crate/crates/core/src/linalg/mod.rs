//! Dense and sparse linear algebra used throughout the crate.

mod dense;
mod eig;
mod factor;
pub mod mtx;
mod sparse;

pub use dense::DenseMatrix;
pub use eig::{sym_eig, SymEig};
pub use factor::{FactorKind, Factorization};
pub use sparse::CsrMatrix;

/// A linear map `y = A x` on vectors of fixed length.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y).expect("operator dimension");
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.matvec(x).expect("operator dimension"));
    }
}

/// Identity map of a given size.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Dense matrix whose column `j` is `op(e_j)`.
pub fn probe(op: &dyn LinearOperator) -> DenseMatrix {
    let n = op.dim();
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    DenseMatrix::from_columns(n, n, |j| {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        e[j] = 0.0;
        y.clone()
    })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
