#![allow(dead_code)]

use sg_core::linalg::{probe, DenseMatrix, LinearOperator};
use sg_core::{GalerkinOperator, PrecondKind, Preconditioner, ProblemConfig, StochasticProblem, TruncationSet};

/// Probabilists' Hermite polynomial by its own recurrence.
pub fn he(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = x * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Gauss-Hermite rule for the standard normal density: roots of `He_n`
/// bracketed on a fine grid and refined by bisection.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let bound = 2.0 * (n as f64).sqrt() + 2.0;
    let steps = 40_000;
    let mut nodes = Vec::with_capacity(n);
    let mut x0 = -bound;
    let mut f0 = he(n, x0);
    for s in 1..=steps {
        let x1 = -bound + 2.0 * bound * s as f64 / steps as f64;
        let f1 = he(n, x1);
        if f0 == 0.0 {
            nodes.push(x0);
        } else if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = he(n, m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            nodes.push(0.5 * (a + b));
        }
        x0 = x1;
        f0 = f1;
    }
    assert_eq!(nodes.len(), n, "root bracketing missed nodes");
    nodes
        .into_iter()
        .map(|x| {
            let d = he(n - 1, x);
            (x, fact(n) / (n as f64 * n as f64 * d * d))
        })
        .collect()
}

/// Tensor rule over `dim` standard normals.
pub fn tensor_rule(n: usize, dim: usize) -> Vec<(Vec<f64>, f64)> {
    let rule = gauss_hermite(n);
    let mut out = vec![(Vec::new(), 1.0)];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * n);
        for (pt, w) in &out {
            for &(x, wx) in &rule {
                let mut p = pt.clone();
                p.push(x);
                next.push((p, w * wx));
            }
        }
        out = next;
    }
    out
}

/// All multi-indices of `dim` variables with total degree at most `p`, in any order.
pub fn all_indices(dim: usize, p: usize) -> Vec<Vec<usize>> {
    if dim == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..=p {
        for mut rest in all_indices(dim - 1, p - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

pub fn psi(idx: &[u32], xi: &[f64]) -> f64 {
    idx.iter().zip(xi).map(|(&a, &x)| he(a as usize, x)).product()
}

pub fn problem(n: usize, p: usize, mesh: usize, cov: f64) -> StochasticProblem {
    StochasticProblem::build(&ProblemConfig::new(n, p, mesh, cov)).expect("problem builds")
}

/// The three instances used by the small oracle checks.
pub fn small_instances() -> Vec<(usize, usize, usize)> {
    vec![(1, 1, 2), (2, 1, 3), (2, 2, 3)]
}

pub fn seeded_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn rel_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    max_abs_diff(a, b) / b.max_abs().max(f64::MIN_POSITIVE)
}

/// Block `(j, k)` ranges of the global dense matrix as row/column index lists.
fn dofs(op: &GalerkinOperator, blocks: std::ops::Range<usize>) -> Vec<usize> {
    let nd = op.n_dof();
    (blocks.start * nd..blocks.end * nd).collect()
}

/// `((L + D) D^{-1} (D + U))^{-1}` with `D` the diagonal blocks of `a`.
pub fn dense_gs_inverse(op: &GalerkinOperator, a: &DenseMatrix) -> DenseMatrix {
    let nd = op.n_dof();
    let n = a.rows();
    let (mut l, mut d, mut u) = (DenseMatrix::zeros(n, n), DenseMatrix::zeros(n, n), DenseMatrix::zeros(n, n));
    for r in 0..n {
        for c in 0..n {
            let (bj, bk) = (r / nd, c / nd);
            let target = if bj == bk {
                &mut d
            } else if bj > bk {
                &mut l
            } else {
                &mut u
            };
            target[(r, c)] = a[(r, c)];
        }
    }
    let dinv = d.inverse().unwrap();
    let mut lhs = l.clone();
    lhs.add_scaled(1.0, &d).unwrap();
    let mut rhs = u.clone();
    rhs.add_scaled(1.0, &d).unwrap();
    lhs.matmul(&dinv).unwrap().matmul(&rhs).unwrap().inverse().unwrap()
}

/// `(G ⊗ K_0)^{-1}` with the trace-weighted `G`.
pub fn dense_kron_inverse(op: &GalerkinOperator) -> DenseMatrix {
    let nb = op.num_blocks();
    let k0 = op.stiffness(0).to_dense();
    let denom: f64 = k0.as_slice().iter().map(|v| v * v).sum();
    let mut g = DenseMatrix::zeros(nb, nb);
    for a in 0..op.num_coeffs() {
        let ka = op.stiffness(a).to_dense();
        let w: f64 = ka.as_slice().iter().zip(k0.as_slice()).map(|(x, y)| x * y).sum::<f64>() / denom;
        for j in 0..nb {
            for k in 0..nb {
                g[(j, k)] += w * op.tensor().get(a, j, k);
            }
        }
    }
    g.kron(&k0).inverse().unwrap()
}

/// hS as the product of its stages: pre-corrections from the top level
/// down, the level-0 solve, then post-corrections upward.
pub fn dense_hs_inverse(op: &GalerkinOperator, a: &DenseMatrix) -> DenseMatrix {
    let levels = op.levels();
    let n = a.rows();
    let top = levels.num_levels() - 1;
    let mut total = DenseMatrix::identity(n);
    let level_dofs = |l: usize| dofs(op, levels.range(l));
    let below = |l: usize| dofs(op, 0..levels.offsets()[l]);
    for l in (1..=top).rev() {
        let (lo, lv) = (below(l), level_dofs(l));
        let dinv = a.select(&lv, &lv).inverse().unwrap();
        let b = a.select(&lo, &lv);
        let bd = b.matmul(&dinv).unwrap();
        let mut stage = DenseMatrix::identity(n);
        for (r, &gr) in lo.iter().enumerate() {
            for (c, &gc) in lv.iter().enumerate() {
                stage[(gr, gc)] = -bd[(r, c)];
            }
        }
        total = stage.matmul(&total).unwrap();
    }
    let l0 = level_dofs(0);
    let a0inv = a.select(&l0, &l0).inverse().unwrap();
    let mut solve0 = DenseMatrix::identity(n);
    for (r, &gr) in l0.iter().enumerate() {
        for (c, &gc) in l0.iter().enumerate() {
            solve0[(gr, gc)] = a0inv[(r, c)];
        }
    }
    total = solve0.matmul(&total).unwrap();
    for l in 1..=top {
        let (lo, lv) = (below(l), level_dofs(l));
        let dinv = a.select(&lv, &lv).inverse().unwrap();
        let dc = dinv.matmul(&a.select(&lv, &lo)).unwrap();
        let mut stage = DenseMatrix::identity(n);
        for (r, &gr) in lv.iter().enumerate() {
            for (c, &gc) in lv.iter().enumerate() {
                stage[(gr, gc)] = dinv[(r, c)];
            }
            for (c, &gc) in lo.iter().enumerate() {
                stage[(gr, gc)] = -dc[(r, c)];
            }
        }
        total = stage.matmul(&total).unwrap();
    }
    total
}

pub fn probe_of(op: &GalerkinOperator, kind: PrecondKind, trunc: TruncationSet) -> DenseMatrix {
    let m = Preconditioner::new(op, kind, trunc).unwrap();
    probe(&m as &dyn LinearOperator)
}

/// Worst `|<Mx, y> - <x, My>| / (|x| |y|)` over a few seeded vectors.
pub fn symmetry_defect(m: &dyn LinearOperator, seed: u64) -> f64 {
    let n = m.dim();
    let mut worst: f64 = 0.0;
    for t in 0..4 {
        let x = seeded_vector(n, seed + 2 * t);
        let y = seeded_vector(n, seed + 2 * t + 1);
        let (mut mx, mut my) = (vec![0.0; n], vec![0.0; n]);
        m.apply(&x, &mut mx);
        m.apply(&y, &mut my);
        let lhs: f64 = mx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&my).map(|(a, b)| a * b).sum();
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max((lhs - rhs).abs() / (nx * ny));
    }
    worst
}

/// Largest `|c_ijk - E[psi_i psi_j psi_k]|` over the whole index box, the
/// expectation taken by tensor Gauss-Hermite quadrature exact for the degree.
pub fn tensor_quadrature_error(n: usize, p: usize, p_coeff: usize) -> f64 {
    let tensor = sg_core::build_c_tensor(n, p, p_coeff).unwrap();
    let coeff = sg_core::MultiIndexSet::new(n, p_coeff).unwrap();
    let sol = sg_core::MultiIndexSet::new(n, p).unwrap();
    let nodes = (p_coeff + 2 * p).div_ceil(2) + 1;
    let rule = tensor_rule(nodes, n);
    let eval = |set: &sg_core::MultiIndexSet| -> Vec<Vec<f64>> {
        rule.iter().map(|(x, _)| set.iter().map(|idx| psi(idx, x)).collect()).collect()
    };
    let (pc, ps) = (eval(&coeff), eval(&sol));
    let mut worst: f64 = 0.0;
    for i in 0..coeff.len() {
        for j in 0..sol.len() {
            for k in 0..sol.len() {
                let exact: f64 = rule
                    .iter()
                    .enumerate()
                    .map(|(q, (_, w))| w * pc[q][i] * ps[q][j] * ps[q][k])
                    .sum();
                worst = worst.max((tensor.get(i, j, k) - exact).abs());
            }
        }
    }
    worst
}
