//! Lognormal random coefficient `k(x, xi) = exp(g(x, xi))` and its chaos coefficients.
//!
//! `g` is a truncated Karhunen-Loeve expansion `g0 + sum_d xi_d g_d(x)` of a
//! Gaussian field with separable exponential covariance. The KL modes come
//! from a lumped-mass discretization of the covariance integral operator on
//! the finite element nodes.

use std::io::Write;
use std::path::Path;

use crate::chaos::MultiIndexSet;
use crate::error::{Error, Result};
use crate::fem::Mesh;
use crate::linalg::{sym_eig, DenseMatrix};

/// How a requested coefficient of variation is turned into Gaussian parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaMode {
    /// Match mean and CoV of the pointwise lognormal distribution.
    #[default]
    MomentMatch,
    /// Use the CoV directly as the Gaussian standard deviation, with `g0 = ln(mean)`.
    GaussianSigma,
}

impl std::str::FromStr for SigmaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moment-match" => Ok(SigmaMode::MomentMatch),
            "gaussian-sigma" => Ok(SigmaMode::GaussianSigma),
            other => Err(Error::InvalidArgument(format!("unknown sigma mode '{other}'"))),
        }
    }
}

/// Solver for the discrete KL eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KlMethod {
    /// Dense eigensolve of the full nodal problem.
    Dense,
    /// Exact factorization into 1D problems on a uniform grid.
    #[default]
    Separable,
}

impl std::str::FromStr for KlMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(KlMethod::Dense),
            "separable" => Ok(KlMethod::Separable),
            other => Err(Error::InvalidArgument(format!("unknown KL method '{other}'"))),
        }
    }
}

/// `C(x, y) = sigma^2 exp(-|x - y|_1 / L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    pub sigma: f64,
    pub corr_len: f64,
}

impl CovarianceSpec {
    pub fn new(sigma: f64, corr_len: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(corr_len > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "covariance needs sigma >= 0 and L > 0, got sigma={sigma}, L={corr_len}"
            )));
        }
        Ok(Self { sigma, corr_len })
    }

    pub fn covariance(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let dist = (x[0] - y[0]).abs() + (x[1] - y[1]).abs();
        self.sigma * self.sigma * (-dist / self.corr_len).exp()
    }
}

/// Gaussian mean `g0` and deviation `sigma_g` such that `exp(g0 + sigma_g xi)`
/// has the given mean and coefficient of variation.
pub fn lognormal_from_moments(mean: f64, cov: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0) || !(cov >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lognormal moments need mean > 0 and CoV >= 0, got {mean}, {cov}"
        )));
    }
    let sigma = (1.0 + cov * cov).ln().sqrt();
    Ok((mean.ln() - 0.5 * sigma * sigma, sigma))
}

/// Gaussian parameters `(g0, sigma_g)` for a target mean and CoV under `mode`.
pub fn gaussian_parameters(mean: f64, cov: f64, mode: SigmaMode) -> Result<(f64, f64)> {
    match mode {
        SigmaMode::MomentMatch => lognormal_from_moments(mean, cov),
        SigmaMode::GaussianSigma => {
            if !(mean > 0.0) || !(cov >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "need mean > 0 and CoV >= 0, got {mean}, {cov}"
                )));
            }
            Ok((mean.ln(), cov))
        }
    }
}

/// Truncated KL expansion sampled at mesh nodes.
#[derive(Debug, Clone)]
pub struct KlExpansion {
    g0: f64,
    /// All discrete eigenvalues, descending.
    eigenvalues: Vec<f64>,
    /// `g_d = sqrt(lambda_d) phi_d` at each node, one vector per retained mode.
    modes: Vec<Vec<f64>>,
    /// Lumped mass weights used for the eigenproblem.
    weights: Vec<f64>,
    /// Elements per side of the uniform grid carrying the modes, if any.
    grid: Option<usize>,
}

impl KlExpansion {
    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mode(&self, d: usize) -> &[f64] {
        &self.modes[d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Elements per side of the uniform grid the modes live on.
    pub fn grid(&self) -> Option<usize> {
        self.grid
    }

    /// Mode values `g_d(x)` by bilinear interpolation on the KL grid.
    pub fn modes_at(&self, x: [f64; 2]) -> Result<Vec<f64>> {
        let n = self
            .grid
            .ok_or_else(|| Error::InvalidArgument("KL modes are not on a uniform grid".into()))?;
        let locate = |t: f64| {
            let s = (t.clamp(0.0, 1.0) * n as f64).min(n as f64);
            let i = (s.floor() as usize).min(n - 1);
            (i, s - i as f64)
        };
        let (ix, tx) = locate(x[0]);
        let (iy, ty) = locate(x[1]);
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let corners = [
            (id(ix, iy), (1.0 - tx) * (1.0 - ty)),
            (id(ix + 1, iy), tx * (1.0 - ty)),
            (id(ix, iy + 1), (1.0 - tx) * ty),
            (id(ix + 1, iy + 1), tx * ty),
        ];
        Ok(self
            .modes
            .iter()
            .map(|m| corners.iter().map(|&(p, w)| w * m[p]).sum())
            .collect())
    }

    /// Unscaled eigenfunction `phi_d` at the nodes.
    pub fn eigenfunction(&self, d: usize) -> Vec<f64> {
        let s = self.eigenvalues[d].sqrt();
        self.modes[d].iter().map(|g| g / s).collect()
    }

    /// Share of the total discrete variance captured by the retained modes.
    pub fn energy_fraction(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().filter(|&&l| l > 0.0).sum();
        let kept: f64 = self.eigenvalues[..self.modes.len()].iter().sum();
        kept / total
    }

    /// Nodal values of `g(x, xi)`.
    pub fn gaussian_field(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.modes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.modes.len(),
                found: xi.len(),
            });
        }
        let n = self.weights.len();
        Ok((0..n)
            .map(|p| {
                self.modes
                    .iter()
                    .zip(xi)
                    .fold(self.g0, |acc, (m, &x)| acc + x * m[p])
            })
            .collect())
    }

    /// Nodal values of `exp(g(x, xi))`.
    pub fn sample_field(&self, xi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gaussian_field(xi)?.into_iter().map(f64::exp).collect())
    }

    /// CSV with columns `node,x,y,g_1..g_N`.
    pub fn write_csv<W: Write>(&self, mesh: &Mesh, out: &mut W) -> std::io::Result<()> {
        write!(out, "node,x,y")?;
        for d in 1..=self.modes.len() {
            write!(out, ",g_{d}")?;
        }
        writeln!(out)?;
        for (p, x) in mesh.nodes().iter().enumerate() {
            write!(out, "{},{},{}", p, x[0], x[1])?;
            for m in &self.modes {
                write!(out, ",{:.16e}", m[p])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, mesh: &Mesh, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(mesh, &mut f).map_err(|e| Error::io(path, e))
    }
}

/// Discrete KL: `W^{1/2} C W^{1/2} z = lambda z` with `C` the nodal covariance
/// and `W` the lumped mass; `phi = W^{-1/2} z` and `g = sqrt(lambda) phi`.
pub fn discrete_kl(mesh: &Mesh, spec: &CovarianceSpec, n_modes: usize, g0: f64) -> Result<KlExpansion> {
    let nodes = mesh.nodes();
    let weights = mesh.lumped_mass();
    let mut kl = discrete_kl_on(nodes, &weights, spec, n_modes, g0)?;
    kl.grid = Some(mesh.elements_per_side());
    Ok(kl)
}

/// The same discrete eigenproblem on a uniform `n x n` grid, solved through
/// its exact factorization into 1D problems.
///
/// Both the kernel and the lumped mass are tensor products on the grid, so
/// every 2D eigenpair is a product of two 1D eigenpairs. Equal eigenvalues
/// (mirrored modes) are ordered by the mode pair, x-index first descending,
/// which removes the arbitrary mixing a dense solver picks for them.
pub fn separable_kl(n: usize, spec: &CovarianceSpec, n_modes: usize, g0: f64) -> Result<KlExpansion> {
    if n == 0 {
        return Err(Error::InvalidArgument("KL grid needs at least one element".into()));
    }
    let np = n + 1;
    if n_modes > np * np {
        return Err(Error::InsufficientModes {
            requested: n_modes,
            found: np * np,
        });
    }
    let h = 1.0 / n as f64;
    let w1: Vec<f64> = (0..np)
        .map(|i| if i == 0 || i == n { 0.5 * h } else { h })
        .collect();
    let sw: Vec<f64> = w1.iter().map(|w| w.sqrt()).collect();
    let mut b = DenseMatrix::zeros(np, np);
    for i in 0..np {
        for j in 0..np {
            let d = (i as f64 - j as f64).abs() * h;
            b[(i, j)] = sw[i] * (-d / spec.corr_len).exp() * sw[j];
        }
    }
    let eig = sym_eig(&b)?;
    let s2 = spec.sigma * spec.sigma;
    let mut pairs: Vec<(f64, usize, usize)> = (0..np)
        .flat_map(|a| (0..np).map(move |c| (a, c)))
        .map(|(a, c)| (s2 * eig.values[a] * eig.values[c], a, c))
        .collect();
    pairs.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y.1.cmp(&x.1))
    });
    let lambda1 = pairs[0].0;
    let positive = pairs.iter().take_while(|p| p.0 > 1e-12 * lambda1 && p.0 > 0.0).count();
    if positive < n_modes {
        return Err(Error::InsufficientModes {
            requested: n_modes,
            found: positive,
        });
    }
    // 1D eigenfunctions phi = z / sqrt(w)
    let phi: Vec<Vec<f64>> = (0..np)
        .map(|a| (0..np).map(|p| eig.vectors[(p, a)] / sw[p]).collect())
        .collect();
    let modes = pairs[..n_modes]
        .iter()
        .map(|&(lambda, a, c)| {
            let s = lambda.sqrt();
            let mut m = vec![0.0; np * np];
            for iy in 0..np {
                for ix in 0..np {
                    m[iy * np + ix] = s * phi[a][ix] * phi[c][iy];
                }
            }
            m
        })
        .collect();
    let weights = (0..np * np).map(|p| w1[p % np] * w1[p / np]).collect();
    Ok(KlExpansion {
        g0,
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        modes,
        weights,
        grid: Some(n),
    })
}

/// Discrete KL on an arbitrary point set with quadrature weights.
pub fn discrete_kl_on(
    points: &[[f64; 2]],
    weights: &[f64],
    spec: &CovarianceSpec,
    n_modes: usize,
    g0: f64,
) -> Result<KlExpansion> {
    let n = points.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    if n_modes > n {
        return Err(Error::InsufficientModes {
            requested: n_modes,
            found: n,
        });
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut b = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = sqrt_w[i] * spec.covariance(points[i], points[j]) * sqrt_w[j];
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let eig = sym_eig(&b)?;
    let lambda1 = eig.values.first().copied().unwrap_or(0.0);
    let positive = eig
        .values
        .iter()
        .take_while(|&&l| l > 1e-12 * lambda1 && l > 0.0)
        .count();
    if positive < n_modes {
        return Err(Error::InsufficientModes {
            requested: n_modes,
            found: positive,
        });
    }
    let modes = (0..n_modes)
        .map(|d| {
            let s = eig.values[d].sqrt();
            (0..n)
                .map(|p| s * eig.vectors[(p, d)] / sqrt_w[p])
                .collect()
        })
        .collect();
    Ok(KlExpansion {
        g0,
        eigenvalues: eig.values,
        modes,
        weights: weights.to_vec(),
        grid: None,
    })
}

/// Chaos coefficients of `exp(g0 + sum_d g_d xi_d)` at a single point:
/// `k_i = prod_d g_d^{i_d} / i_d! * exp(g0 + |g|^2 / 2)`.
pub fn gpc_coefficients_at(g0: f64, g: &[f64], basis: &MultiIndexSet) -> Vec<f64> {
    let mean = (g0 + 0.5 * g.iter().map(|v| v * v).sum::<f64>()).exp();
    let p = basis.degree();
    // powers[d][a] = g_d^a / a!
    let powers: Vec<Vec<f64>> = g
        .iter()
        .map(|&gd| {
            let mut t = Vec::with_capacity(p + 1);
            t.push(1.0);
            for a in 1..=p {
                t.push(t[a - 1] * gd / a as f64);
            }
            t
        })
        .collect();
    basis
        .iter()
        .map(|idx| {
            idx.iter()
                .enumerate()
                .fold(mean, |acc, (d, &a)| acc * powers[d][a as usize])
        })
        .collect()
}

/// `k_i(q)` for every basis index `i` and quadrature point `q`.
#[derive(Debug, Clone)]
pub struct CoefficientFields {
    values: Vec<Vec<f64>>,
}

impl CoefficientFields {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn field(&self, i: usize) -> &[f64] {
        &self.values[i]
    }
}

/// Evaluates the chaos coefficients at every quadrature point, with the KL
/// modes interpolated bilinearly from the nodes.
pub fn gpc_coefficients(kl: &KlExpansion, basis: &MultiIndexSet, mesh: &Mesh) -> Result<CoefficientFields> {
    if basis.dim() != kl.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: kl.n_modes(),
            found: basis.dim(),
        });
    }
    let nq = mesh.quadrature().len();
    let at_quad: Vec<Vec<f64>> = match kl.grid {
        Some(n) if n != mesh.elements_per_side() => {
            let mut by_mode = vec![vec![0.0; nq]; kl.n_modes()];
            for (q, qp) in mesh.quadrature().iter().enumerate() {
                for (d, v) in kl.modes_at([qp.x, qp.y])?.into_iter().enumerate() {
                    by_mode[d][q] = v;
                }
            }
            by_mode
        }
        _ => {
            if kl.weights.len() != mesh.num_nodes() {
                return Err(Error::DimensionMismatch {
                    expected: mesh.num_nodes(),
                    found: kl.weights.len(),
                });
            }
            kl.modes.iter().map(|m| mesh.interpolate(m)).collect()
        }
    };
    let mut values = vec![vec![0.0; nq]; basis.len()];
    let mut g = vec![0.0; kl.n_modes()];
    for q in 0..nq {
        for (d, m) in at_quad.iter().enumerate() {
            g[d] = m[q];
        }
        for (i, k) in gpc_coefficients_at(kl.g0, &g, basis).into_iter().enumerate() {
            values[i][q] = k;
        }
    }
    Ok(CoefficientFields { values })
}
