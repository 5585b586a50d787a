//! Preconditioned conjugate gradients, flexible and standard, with the
//! Lanczos condition-number estimate.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, sym_eig, DenseMatrix, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual tolerance `|b - Ax| / |b|`.
    pub tol: f64,
    pub maxit: usize,
    /// Recompute the true residual every this many iterations.
    pub refresh: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: 1000,
            refresh: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgVariant {
    /// Polak-Ribiere direction update; admits variable preconditioners.
    Flexible,
    /// Fletcher-Reeves update of standard PCG.
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residuals, starting with the initial one.
    pub residuals: Vec<f64>,
    pub kappa: f64,
    pub wall_time: Duration,
    /// Applications of the system operator.
    pub matvecs: usize,
    pub converged: bool,
    /// Set when `p^T A p <= 0` stopped the iteration.
    pub breakdown: bool,
    pub alphas: Vec<f64>,
    /// `rho_{k+1} / rho_k` for each completed direction update.
    pub betas: Vec<f64>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }

    /// `iteration,relative_residual` lines with a header.
    pub fn write_trace<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "iteration,relative_residual")?;
        for (i, r) in self.residuals.iter().enumerate() {
            writeln!(out, "{i},{r:.6e}")?;
        }
        Ok(())
    }

    pub fn save_trace(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_trace(&mut f).map_err(|e| Error::io(path, e))
    }
}

pub fn flexible_cg(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    opts: &SolveOptions,
) -> (Vec<f64>, SolveReport) {
    conjugate_gradient(a, m, b, opts, CgVariant::Flexible)
}

pub fn pcg(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    opts: &SolveOptions,
) -> (Vec<f64>, SolveReport) {
    conjugate_gradient(a, m, b, opts, CgVariant::Standard)
}

/// CG from a zero initial guess.
pub fn conjugate_gradient(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    opts: &SolveOptions,
    variant: CgVariant,
) -> (Vec<f64>, SolveReport) {
    let start = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        iterations: 0,
        residuals: vec![1.0],
        kappa: 1.0,
        wall_time: Duration::ZERO,
        matvecs: 0,
        converged: false,
        breakdown: false,
        alphas: Vec::new(),
        betas: Vec::new(),
    };
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        report.residuals[0] = 0.0;
        report.converged = true;
        report.wall_time = start.elapsed();
        return (x, report);
    }

    let mut r = b.to_vec();
    let mut r_old = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut rho = dot(&z, &r);
    let mut p = z.clone();

    for it in 1..=opts.maxit {
        a.apply(&p, &mut q);
        report.matvecs += 1;
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            report.breakdown = true;
            break;
        }
        let alpha = rho / pq;
        report.alphas.push(alpha);
        axpy(alpha, &p, &mut x);
        if variant == CgVariant::Flexible {
            r_old.copy_from_slice(&r);
        }
        if opts.refresh > 0 && it % opts.refresh == 0 {
            a.apply(&x, &mut q);
            report.matvecs += 1;
            for ((ri, bi), qi) in r.iter_mut().zip(b).zip(&q) {
                *ri = bi - qi;
            }
        } else {
            axpy(-alpha, &q, &mut r);
        }
        let res = norm2(&r) / bnorm;
        report.residuals.push(res);
        report.iterations = it;
        if res <= opts.tol {
            report.converged = true;
            break;
        }
        m.apply(&r, &mut z);
        let rho_new = dot(&z, &r);
        let beta = match variant {
            CgVariant::Standard => rho_new / rho,
            CgVariant::Flexible => (rho_new - dot(&z, &r_old)) / rho,
        };
        report.betas.push(rho_new / rho);
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rho = rho_new;
    }
    report.kappa = lanczos_condition_estimate(&report.alphas, &report.betas);
    report.wall_time = start.elapsed();
    (x, report)
}

/// Tridiagonal Lanczos matrix built from CG coefficients.
///
/// `betas[k-1]` links `alphas[k-1]` and `alphas[k]`.
pub fn lanczos_matrix(alphas: &[f64], betas: &[f64]) -> DenseMatrix {
    let m = alphas.len();
    let mut t = DenseMatrix::zeros(m, m);
    for k in 0..m {
        t[(k, k)] = 1.0 / alphas[k];
        if k > 0 {
            let b = betas[k - 1];
            t[(k, k)] += b / alphas[k - 1];
            let off = b.sqrt() / alphas[k - 1];
            t[(k, k - 1)] = off;
            t[(k - 1, k)] = off;
        }
    }
    t
}

/// `lambda_max / lambda_min` of the Lanczos matrix; 1 with fewer than two steps.
pub fn lanczos_condition_estimate(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len().min(betas.len() + 1);
    if m < 2 {
        return 1.0;
    }
    let t = lanczos_matrix(&alphas[..m], &betas[..m - 1]);
    match sym_eig(&t) {
        Ok(e) => {
            let hi = e.values[0];
            let lo = e.values[m - 1];
            if lo > 0.0 {
                (hi / lo).max(1.0)
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Identity;

    #[test]
    fn identity_one_iteration() {
        let b = vec![1.0, -2.0, 3.0];
        let (x, rep) = flexible_cg(&Identity(3), &Identity(3), &b, &SolveOptions::default());
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
        assert_eq!(rep.kappa, 1.0);
    }

    #[test]
    fn diag_two_steps() {
        let a = DenseMatrix::from_diagonal(&[1.0, 2.0]);
        let (x, rep) = pcg(&a, &Identity(2), &[1.0, 1.0], &SolveOptions::default());
        assert!(rep.iterations <= 2);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kappa_of_diagonal() {
        let a = DenseMatrix::from_diagonal(&[1.0, 10.0]);
        let (_, rep) = pcg(&a, &Identity(2), &[1.0, 1.0], &SolveOptions { tol: 1e-14, ..Default::default() });
        assert!((rep.kappa - 10.0).abs() < 1e-8, "{}", rep.kappa);
    }

    #[test]
    fn zero_rhs() {
        let (x, rep) = pcg(&Identity(2), &Identity(2), &[0.0, 0.0], &SolveOptions::default());
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn indefinite_breaks_down() {
        let a = DenseMatrix::from_diagonal(&[-1.0, 1.0]);
        let (_, rep) = pcg(&a, &Identity(2), &[1.0, 0.0], &SolveOptions::default());
        assert!(rep.breakdown);
        assert!(!rep.converged);
    }

    #[test]
    fn maxit_reported() {
        let a = DenseMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0]);
        let opts = SolveOptions { maxit: 2, ..Default::default() };
        let (_, rep) = pcg(&a, &Identity(4), &[1.0; 4], &opts);
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 2);
    }

    #[test]
    fn trace_csv() {
        let (_, rep) = pcg(&Identity(2), &Identity(2), &[1.0, 1.0], &SolveOptions::default());
        let mut buf = Vec::new();
        rep.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,relative_residual\n0,1.0"));
    }
}
