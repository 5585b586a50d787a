//! Preconditioners for the stochastic Galerkin system.
//!
//! Each one reads its off-diagonal couplings through the truncated block
//! product of [`GalerkinOperator`]; diagonal and level blocks always use the
//! full coefficient sum.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::galerkin::{GalerkinOperator, LevelMap, TruncationSet};
use crate::krylov::{self, SolveOptions};
use crate::linalg::{self, DenseMatrix, Factorization, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecondKind {
    MeanBased,
    Kronecker,
    HierSchur,
    ApproxHierSchur,
    GaussSeidel,
    ApproxHierGs,
}

impl PrecondKind {
    pub const ALL: [PrecondKind; 6] = [
        PrecondKind::MeanBased,
        PrecondKind::Kronecker,
        PrecondKind::HierSchur,
        PrecondKind::ApproxHierSchur,
        PrecondKind::GaussSeidel,
        PrecondKind::ApproxHierGs,
    ];

    /// Short column label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            PrecondKind::MeanBased => "mb",
            PrecondKind::Kronecker => "K",
            PrecondKind::HierSchur => "hS",
            PrecondKind::ApproxHierSchur => "ahS",
            PrecondKind::GaussSeidel => "GS",
            PrecondKind::ApproxHierGs => "ahGS",
        }
    }
}

impl fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PrecondKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mb" | "mean" => Ok(PrecondKind::MeanBased),
            "k" | "kron" | "kronecker" => Ok(PrecondKind::Kronecker),
            "hs" => Ok(PrecondKind::HierSchur),
            "ahs" => Ok(PrecondKind::ApproxHierSchur),
            "gs" => Ok(PrecondKind::GaussSeidel),
            "ahgs" => Ok(PrecondKind::ApproxHierGs),
            other => Err(Error::InvalidArgument(format!("unknown preconditioner '{other}'"))),
        }
    }
}

/// How the level blocks `D_l` of hS are inverted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LevelSolve {
    #[default]
    Direct,
    /// Inner block-Jacobi preconditioned CG; makes the preconditioner nonlinear.
    InnerCg { tol: f64, maxit: usize },
}

/// A global vector viewed level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct HierVector {
    data: Vec<f64>,
    n_dof: usize,
    offsets: Vec<usize>,
}

impl HierVector {
    pub fn zeros(levels: &LevelMap, n_dof: usize) -> Self {
        Self {
            data: vec![0.0; levels.num_blocks() * n_dof],
            n_dof,
            offsets: levels.offsets().to_vec(),
        }
    }

    pub fn from_vec(levels: &LevelMap, n_dof: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != levels.num_blocks() * n_dof {
            return Err(Error::DimensionMismatch {
                expected: levels.num_blocks() * n_dof,
                found: data.len(),
            });
        }
        Ok(Self {
            data,
            n_dof,
            offsets: levels.offsets().to_vec(),
        })
    }

    fn dofs(&self, l: usize) -> Range<usize> {
        self.offsets[l] * self.n_dof..self.offsets[l + 1] * self.n_dof
    }

    /// `x_(l)`.
    pub fn level(&self, l: usize) -> &[f64] {
        &self.data[self.dofs(l)]
    }

    pub fn level_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.dofs(l);
        &mut self.data[r]
    }

    /// `x_(0:l)`.
    pub fn upto(&self, l: usize) -> &[f64] {
        &self.data[..self.offsets[l + 1] * self.n_dof]
    }

    /// `(x_(0:l-1), x_(l))` as disjoint mutable views.
    pub fn split_level_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let r = self.dofs(l);
        let (lower, rest) = self.data.split_at_mut(r.start);
        (lower, &mut rest[..r.len()])
    }

    /// Block `x_(j)` of the chaos index `j`.
    pub fn block(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_dof..(j + 1) * self.n_dof]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

#[derive(Debug)]
pub struct Preconditioner<'a> {
    op: &'a GalerkinOperator,
    kind: PrecondKind,
    trunc: TruncationSet,
    level_solve: LevelSolve,
    mean_scale: Vec<f64>,
    kron: Option<Factorization>,
}

impl<'a> Preconditioner<'a> {
    /// Builds the preconditioner and every factorization it needs.
    pub fn new(op: &'a GalerkinOperator, kind: PrecondKind, trunc: TruncationSet) -> Result<Self> {
        let tensor = op.tensor();
        let mut p = Self {
            op,
            kind,
            mean_scale: (0..op.num_blocks()).map(|j| tensor.get(0, j, j)).collect(),
            trunc,
            level_solve: LevelSolve::Direct,
            kron: None,
        };
        match kind {
            PrecondKind::MeanBased => {
                op.mean_factor()?;
            }
            PrecondKind::Kronecker => {
                op.mean_factor()?;
                p.kron = Some(Factorization::from_dense(&p.kronecker_g()?)?);
            }
            PrecondKind::HierSchur => {
                op.mean_factor()?;
                for l in 1..op.levels().num_levels() {
                    op.level_factor(l)?;
                }
            }
            PrecondKind::ApproxHierSchur | PrecondKind::GaussSeidel | PrecondKind::ApproxHierGs => {
                for j in 0..op.num_blocks() {
                    op.diag_factor(j)?;
                }
            }
        }
        Ok(p)
    }

    /// Untruncated variant.
    pub fn full(op: &'a GalerkinOperator, kind: PrecondKind) -> Result<Self> {
        Self::new(op, kind, op.full_truncation().clone())
    }

    /// Switches the hS level solves; other kinds ignore this.
    pub fn with_level_solve(mut self, solve: LevelSolve) -> Result<Self> {
        if let LevelSolve::InnerCg { tol, maxit } = solve {
            if !(tol > 0.0) || maxit == 0 {
                return Err(Error::InvalidArgument("inner CG needs tol > 0 and maxit > 0".into()));
            }
            if self.kind == PrecondKind::HierSchur {
                for j in 0..self.op.num_blocks() {
                    self.op.diag_factor(j)?;
                }
            }
        }
        self.level_solve = solve;
        Ok(self)
    }

    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn truncation(&self) -> &TruncationSet {
        &self.trunc
    }

    /// True when the action is not a fixed linear map.
    pub fn is_variable(&self) -> bool {
        self.kind == PrecondKind::HierSchur && self.level_solve != LevelSolve::Direct
    }

    /// `G = sum_a w_a G_a` over the retained indices.
    pub fn kronecker_g(&self) -> Result<DenseMatrix> {
        let weights = self.op.kronecker_weights();
        let nb = self.op.num_blocks();
        let mut g = DenseMatrix::zeros(nb, nb);
        for &a in self.trunc.indices() {
            for e in self.op.tensor().slice(a) {
                g[(e.j as usize, e.k as usize)] += weights[a] * e.value;
            }
        }
        Ok(g)
    }

    /// `v = M^{-1} r`.
    pub fn apply(&self, r: &[f64], v: &mut [f64]) -> Result<()> {
        let n = self.op.global_dim();
        if r.len() != n || v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if r.len() != n { r.len() } else { v.len() },
            });
        }
        match self.kind {
            PrecondKind::MeanBased => self.apply_mb(r, v),
            PrecondKind::Kronecker => self.apply_kron(r, v),
            PrecondKind::HierSchur => self.apply_hs(r, v, true),
            PrecondKind::ApproxHierSchur => self.apply_hs(r, v, false),
            PrecondKind::GaussSeidel => self.apply_gs(r, v),
            PrecondKind::ApproxHierGs => self.apply_ahgs(r, v),
        }
    }

    fn apply_mb(&self, r: &[f64], v: &mut [f64]) -> Result<()> {
        let f = self.op.mean_factor()?;
        let nd = self.op.n_dof();
        v.copy_from_slice(r);
        for (j, block) in v.chunks_mut(nd).enumerate() {
            f.solve_in_place(block)?;
            let s = 1.0 / self.mean_scale[j];
            block.iter_mut().for_each(|x| *x *= s);
        }
        Ok(())
    }

    fn apply_kron(&self, r: &[f64], v: &mut [f64]) -> Result<()> {
        let f = self.op.mean_factor()?;
        let g = self.kron.as_ref().expect("built in new");
        let nd = self.op.n_dof();
        let nb = self.op.num_blocks();
        v.copy_from_slice(r);
        for block in v.chunks_mut(nd) {
            f.solve_in_place(block)?;
        }
        let mut col = vec![0.0; nb];
        for d in 0..nd {
            for j in 0..nb {
                col[j] = v[j * nd + d];
            }
            g.solve_in_place(&mut col)?;
            for j in 0..nb {
                v[j * nd + d] = col[j];
            }
        }
        Ok(())
    }

    /// Solves with the diagonal blocks of `blocks`, in place.
    fn block_diag_solve(&self, blocks: Range<usize>, x: &mut [f64]) -> Result<()> {
        let nd = self.op.n_dof();
        for (j, chunk) in blocks.zip(x.chunks_mut(nd)) {
            self.op.diag_factor(j)?.solve_in_place(chunk)?;
        }
        Ok(())
    }

    /// `D_l^{-1}` (exact) or its block-diagonal approximation, in place.
    fn level_inverse(&self, l: usize, x: &mut [f64], exact: bool) -> Result<()> {
        let blocks = self.op.levels().range(l);
        if l == 0 {
            return self.op.mean_factor()?.solve_in_place(x);
        }
        if !exact {
            return self.block_diag_solve(blocks, x);
        }
        match self.level_solve {
            LevelSolve::Direct => self.op.level_factor(l)?.solve_in_place(x),
            LevelSolve::InnerCg { tol, maxit } => {
                let a = LevelOperator { op: self.op, blocks: blocks.clone() };
                let m = BlockDiagInverse { pre: self, blocks };
                let opts = SolveOptions { tol, maxit, ..SolveOptions::default() };
                let (sol, _) = krylov::pcg(&a, &m, x, &opts);
                x.copy_from_slice(&sol);
                Ok(())
            }
        }
    }

    fn apply_hs(&self, r: &[f64], v: &mut [f64], exact: bool) -> Result<()> {
        let op = self.op;
        let levels = op.levels();
        let nd = op.n_dof();
        let top = levels.num_levels() - 1;
        let mut w = HierVector::from_vec(levels, nd, r.to_vec())?;
        // pre-correction, top level down
        for l in (1..=top).rev() {
            let blocks = levels.range(l);
            let (lower, level) = w.split_level_mut(l);
            let mut y = level.to_vec();
            self.level_inverse(l, &mut y, exact)?;
            op.tmatvec_acc(-1.0, 0..blocks.start, blocks, &self.trunc, &y, lower)?;
        }
        let mut out = HierVector::zeros(levels, nd);
        let v0 = out.level_mut(0);
        v0.copy_from_slice(w.level(0));
        self.level_inverse(0, v0, exact)?;
        // post-correction, bottom level up
        for l in 1..=top {
            let blocks = levels.range(l);
            let mut t = w.level(l).to_vec();
            let (lower, level) = out.split_level_mut(l);
            op.tmatvec_acc(-1.0, blocks, 0..levels.offsets()[l], &self.trunc, lower, &mut t)?;
            self.level_inverse(l, &mut t, exact)?;
            level.copy_from_slice(&t);
        }
        v.copy_from_slice(out.as_slice());
        Ok(())
    }

    /// Symmetric Gauss-Seidel sweep over the given partition of the blocks.
    ///
    /// Forward lower sums are kept and reused by the backward sweep.
    fn symmetric_sweep(&self, parts: &[Range<usize>], r: &[f64], v: &mut [f64]) -> Result<()> {
        let op = self.op;
        let nd = op.n_dof();
        let nb = op.num_blocks();
        let mut s = r.to_vec();
        for p in parts {
            let dofs = op.blocks_dofs(p);
            let mut x = s[dofs.clone()].to_vec();
            self.block_diag_solve(p.clone(), &mut x)?;
            op.tmatvec_acc(-1.0, p.end..nb, p.clone(), &self.trunc, &x, &mut s[dofs.end..])?;
            v[dofs].copy_from_slice(&x);
        }
        let mut upper = vec![0.0; nb * nd];
        for q in (1..parts.len()).rev() {
            let hi = &parts[q];
            let hi_dofs = op.blocks_dofs(hi);
            let x = v[hi_dofs.clone()].to_vec();
            op.tmatvec_acc(-1.0, 0..hi.start, hi.clone(), &self.trunc, &x, &mut upper[..hi_dofs.start])?;
            let p = &parts[q - 1];
            let dofs = op.blocks_dofs(p);
            let mut y: Vec<f64> = s[dofs.clone()]
                .iter()
                .zip(&upper[dofs.clone()])
                .map(|(a, b)| a + b)
                .collect();
            self.block_diag_solve(p.clone(), &mut y)?;
            v[dofs].copy_from_slice(&y);
        }
        Ok(())
    }

    fn apply_gs(&self, r: &[f64], v: &mut [f64]) -> Result<()> {
        let parts: Vec<Range<usize>> = (0..self.op.num_blocks()).map(|j| j..j + 1).collect();
        self.symmetric_sweep(&parts, r, v)
    }

    fn apply_ahgs(&self, r: &[f64], v: &mut [f64]) -> Result<()> {
        let levels = self.op.levels();
        let parts: Vec<Range<usize>> = (0..levels.num_levels()).map(|l| levels.range(l)).collect();
        self.symmetric_sweep(&parts, r, v)
    }

    /// Dense matrix of the action, column by column.
    pub fn probe(&self) -> DenseMatrix {
        linalg::probe(self)
    }

    /// Writes the probed matrix in Matrix Market format.
    pub fn export_probe(&self, path: &Path, cap: usize) -> Result<()> {
        let dim = self.op.global_dim();
        if dim > cap {
            return Err(Error::CapExceeded { required: dim, cap });
        }
        linalg::mtx::save_dense_mtx(path, &self.probe())
    }
}

impl LinearOperator for Preconditioner<'_> {
    fn dim(&self) -> usize {
        self.op.global_dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        Preconditioner::apply(self, x, y).expect("factorizations prepared in new");
    }
}

/// The level block `D_l` as an operator on its own blocks.
struct LevelOperator<'a> {
    op: &'a GalerkinOperator,
    blocks: Range<usize>,
}

impl LinearOperator for LevelOperator<'_> {
    fn dim(&self) -> usize {
        self.blocks.len() * self.op.n_dof()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let full = self.op.full_truncation();
        self.op
            .tmatvec(self.blocks.clone(), self.blocks.clone(), full, x, y)
            .expect("level dimensions");
    }
}

struct BlockDiagInverse<'p, 'a> {
    pre: &'p Preconditioner<'a>,
    blocks: Range<usize>,
}

impl LinearOperator for BlockDiagInverse<'_, '_> {
    fn dim(&self) -> usize {
        self.blocks.len() * self.pre.op.n_dof()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.pre
            .block_diag_solve(self.blocks.clone(), y)
            .expect("diagonal factorizations prepared");
    }
}
