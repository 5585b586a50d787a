//! Parameter sweeps over the preconditioners, tensor sparsity counts and stiffness-norm decay.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::chaos::{self, MultiIndexSet};
use crate::error::{Error, Result};
use crate::field::{KlMethod, SigmaMode};
use crate::galerkin::{NormKind, TruncationSet};
use crate::krylov::{self, SolveOptions};
use crate::linalg::mtx::{self, MtxSymmetry};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::precond::{PrecondKind, Preconditioner};
use crate::problem::{ProblemConfig, StochasticProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    LogN,
    LogP,
    LogCov,
    LogH,
    TruncStd,
    TruncAdapt,
}

impl TableKind {
    pub const ALL: [TableKind; 6] = [
        TableKind::LogN,
        TableKind::LogP,
        TableKind::LogCov,
        TableKind::LogH,
        TableKind::TruncStd,
        TableKind::TruncAdapt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableKind::LogN => "logN",
            TableKind::LogP => "logP",
            TableKind::LogCov => "logCoV",
            TableKind::LogH => "logh",
            TableKind::TruncStd => "trunc-std",
            TableKind::TruncAdapt => "trunc-adapt",
        }
    }
}

impl fmt::Display for TableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        TableKind::ALL
            .into_iter()
            .find(|k| k.name().to_ascii_lowercase() == key || k.name().replace('-', "") == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown table '{s}'")))
    }
}

/// Sweep settings. Values not swept stay at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub base: ProblemConfig,
    pub n_values: Vec<usize>,
    pub p_values: Vec<usize>,
    /// CoV in percent.
    pub cov_values: Vec<f64>,
    pub mesh_values: Vec<usize>,
    pub lt_values: Vec<usize>,
    /// CoV (percent) groups of the truncation tables.
    pub trunc_covs: Vec<f64>,
    /// Adaptive thresholds for each CoV group, matched by position.
    pub tau_lists: Vec<Vec<f64>>,
    /// Preconditioners for the non-truncated tables.
    pub preconditioners: Vec<PrecondKind>,
    pub solve: SolveOptions,
    pub norm: NormKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            base: ProblemConfig::default(),
            n_values: vec![1, 2, 3, 4],
            p_values: vec![1, 2, 3, 4],
            cov_values: vec![25.0, 50.0, 75.0, 100.0, 125.0, 150.0],
            mesh_values: vec![5, 10, 15, 20],
            lt_values: vec![0, 1, 2, 3, 4, 8],
            trunc_covs: vec![25.0, 50.0, 100.0, 150.0],
            tau_lists: vec![
                vec![10.0, 1.0, 0.1, 0.0],
                vec![10.0, 1.0, 0.1, 0.0],
                vec![100.0, 10.0, 1.0, 0.1, 0.0],
                vec![100.0, 10.0, 1.0, 0.1, 0.01, 0.0],
            ],
            preconditioners: PrecondKind::ALL.to_vec(),
            solve: SolveOptions::default(),
            norm: NormKind::Frobenius,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value '{v}' for '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Flat `key = value` text; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one option by name.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "N" | "n_stoch" => self.base.n_stoch = parse_value(key, v)?,
            "P" | "order" => {
                self.base.order = parse_value(key, v)?;
                self.base.coeff_order = 2 * self.base.order;
            }
            "mesh" => self.base.mesh = parse_value(key, v)?,
            "cov" => self.base.cov = parse_value::<f64>(key, v)? / 100.0,
            "mean" => self.base.mean = parse_value(key, v)?,
            "L" | "corr_len" => self.base.corr_len = parse_value(key, v)?,
            "source" => self.base.source = parse_value(key, v)?,
            "sigma_mode" => self.base.sigma_mode = parse_value::<SigmaMode>(key, v)?,
            "kl_method" => self.base.kl_method = parse_value::<KlMethod>(key, v)?,
            "kl_grid" => {
                let n: usize = parse_value(key, v)?;
                self.base.kl_grid = (n > 0).then_some(n);
            }
            "tol" => self.solve.tol = parse_value(key, v)?,
            "maxit" => self.solve.maxit = parse_value(key, v)?,
            "norm" => self.norm = parse_value(key, v)?,
            "N_list" => self.n_values = parse_list(key, v)?,
            "P_list" => self.p_values = parse_list(key, v)?,
            "cov_list" => self.cov_values = parse_list(key, v)?,
            "mesh_list" => self.mesh_values = parse_list(key, v)?,
            "lt_list" => self.lt_values = parse_list(key, v)?,
            "trunc_cov_list" => self.trunc_covs = parse_list(key, v)?,
            "precond" => self.preconditioners = parse_list(key, v)?,
            _ => {
                if let Some(idx) = key.strip_prefix("tau_list") {
                    let i: usize = idx.trim_start_matches('.').parse().map_err(|_| {
                        Error::InvalidArgument(format!("tau list key '{key}' needs an index"))
                    })?;
                    if self.tau_lists.len() <= i {
                        self.tau_lists.resize(i + 1, Vec::new());
                    }
                    self.tau_lists[i] = parse_list(key, v)?;
                } else {
                    return Err(Error::InvalidArgument(format!("unknown key '{key}'")));
                }
            }
        }
        Ok(())
    }
}

/// One preconditioned solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub iterations: usize,
    pub kappa: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// Values of the setup columns.
    pub setup: Vec<String>,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: TableKind,
    pub setup_columns: Vec<String>,
    pub preconditioners: Vec<PrecondKind>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn cell(&self, row: usize, kind: PrecondKind) -> Option<Cell> {
        let col = self.preconditioners.iter().position(|&k| k == kind)?;
        self.rows.get(row).map(|r| r.cells[col])
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let mut header: Vec<String> = self.setup_columns.clone();
        for k in &self.preconditioners {
            header.push(format!("{k}_it"));
            header.push(format!("{k}_kappa"));
        }
        header.push("not_converged".into());
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let mut fields = row.setup.clone();
            let mut failed = Vec::new();
            for (k, c) in self.preconditioners.iter().zip(&row.cells) {
                fields.push(c.iterations.to_string());
                fields.push(format!("{:.2}", c.kappa));
                if !c.converged {
                    failed.push(k.label());
                }
            }
            fields.push(failed.join(";"));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn write_markdown<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let mut head: Vec<String> = self.setup_columns.clone();
        for k in &self.preconditioners {
            head.push(format!("{k} it"));
            head.push(format!("{k} κ"));
        }
        writeln!(out, "| {} |", head.join(" | "))?;
        writeln!(out, "|{}", "---|".repeat(head.len()))?;
        for row in &self.rows {
            let mut fields = row.setup.clone();
            for c in &row.cells {
                let mark = if c.converged { "" } else { "*" };
                fields.push(format!("{}{mark}", c.iterations));
                fields.push(format!("{:.2}", c.kappa));
            }
            writeln!(out, "| {} |", fields.join(" | "))?;
        }
        Ok(())
    }
}

/// Solves the problem's system with one preconditioner from a zero guess.
pub fn solve_cell(
    problem: &StochasticProblem,
    kind: PrecondKind,
    trunc: TruncationSet,
    opts: &SolveOptions,
) -> Result<Cell> {
    let m = Preconditioner::new(&problem.operator, kind, trunc)?;
    let (_, rep) = krylov::flexible_cg(&problem.operator, &m, &problem.rhs(), opts);
    Ok(Cell {
        iterations: rep.iterations,
        kappa: rep.kappa,
        converged: rep.converged,
    })
}

fn full_cells(
    problem: &StochasticProblem,
    kinds: &[PrecondKind],
    opts: &SolveOptions,
) -> Result<Vec<Cell>> {
    kinds
        .iter()
        .map(|&k| solve_cell(problem, k, problem.operator.full_truncation().clone(), opts))
        .collect()
}

const TRUNCATED: [PrecondKind; 4] = [
    PrecondKind::HierSchur,
    PrecondKind::ApproxHierSchur,
    PrecondKind::GaussSeidel,
    PrecondKind::ApproxHierGs,
];

pub fn run_table(cfg: &ExperimentConfig, table: TableKind) -> Result<Report> {
    run_table_with(cfg, table, |_| {})
}

/// Like [`run_table`], calling `on_row` as each row completes.
pub fn run_table_with(
    cfg: &ExperimentConfig,
    table: TableKind,
    mut on_row: impl FnMut(&ReportRow),
) -> Result<Report> {
    let opts = &cfg.solve;
    let mut rows = Vec::new();
    let mut push = |row: ReportRow, rows: &mut Vec<ReportRow>| {
        on_row(&row);
        rows.push(row);
    };
    let (setup_columns, preconditioners): (Vec<&str>, Vec<PrecondKind>) = match table {
        TableKind::LogN => (vec!["N", "ndof"], cfg.preconditioners.clone()),
        TableKind::LogP => (vec!["P", "ndof"], cfg.preconditioners.clone()),
        TableKind::LogCov => (vec!["CoV"], cfg.preconditioners.clone()),
        TableKind::LogH => (vec!["h", "ndof"], cfg.preconditioners.clone()),
        TableKind::TruncStd => (
            vec!["CoV", "lt", "Mt+1", "nz(c_ijk)"],
            [&[PrecondKind::MeanBased, PrecondKind::Kronecker][..], &TRUNCATED].concat(),
        ),
        TableKind::TruncAdapt => (
            vec!["CoV", "tau", "N_adapt", "nz(c_ijk)"],
            [&[PrecondKind::MeanBased, PrecondKind::Kronecker][..], &TRUNCATED].concat(),
        ),
    };
    match table {
        TableKind::LogN | TableKind::LogP | TableKind::LogCov | TableKind::LogH => {
            let values: Vec<(String, ProblemConfig)> = match table {
                TableKind::LogN => cfg
                    .n_values
                    .iter()
                    .map(|&n| (n.to_string(), ProblemConfig { n_stoch: n, ..cfg.base.clone() }))
                    .collect(),
                TableKind::LogP => cfg
                    .p_values
                    .iter()
                    .map(|&p| {
                        let c = ProblemConfig {
                            order: p,
                            coeff_order: 2 * p,
                            ..cfg.base.clone()
                        };
                        (p.to_string(), c)
                    })
                    .collect(),
                TableKind::LogCov => cfg
                    .cov_values
                    .iter()
                    .map(|&c| (fmt_num(c), ProblemConfig { cov: c / 100.0, ..cfg.base.clone() }))
                    .collect(),
                _ => cfg
                    .mesh_values
                    .iter()
                    .map(|&m| (format!("1/{m}"), ProblemConfig { mesh: m, ..cfg.base.clone() }))
                    .collect(),
            };
            for (label, pc) in values {
                let problem = StochasticProblem::build(&pc)?;
                let cells = full_cells(&problem, &preconditioners, opts)?;
                let mut setup = vec![label];
                if table != TableKind::LogCov {
                    setup.push(problem.operator.global_dim().to_string());
                }
                push(ReportRow { setup, cells }, &mut rows);
            }
        }
        TableKind::TruncStd | TableKind::TruncAdapt => {
            for (g, &cov) in cfg.trunc_covs.iter().enumerate() {
                let pc = ProblemConfig {
                    cov: cov / 100.0,
                    ..cfg.base.clone()
                };
                let problem = StochasticProblem::build(&pc)?;
                let op = &problem.operator;
                let reference = full_cells(&problem, &preconditioners[..2], opts)?;
                let sets: Vec<(String, TruncationSet)> = if table == TableKind::TruncStd {
                    cfg.lt_values
                        .iter()
                        .map(|&lt| {
                            TruncationSet::standard(pc.n_stoch, lt, op.num_coeffs())
                                .map(|t| (lt.to_string(), t))
                        })
                        .collect::<Result<_>>()?
                } else {
                    let norms = op.stiffness_norms(cfg.norm);
                    let taus = cfg.tau_lists.get(g).cloned().unwrap_or_default();
                    taus.iter()
                        .map(|&tau| {
                            TruncationSet::adaptive(tau, &norms, op.tensor()).map(|t| (fmt_num(tau), t))
                        })
                        .collect::<Result<_>>()?
                };
                for (label, trunc) in sets {
                    let mut cells = reference.clone();
                    for &k in &TRUNCATED {
                        cells.push(solve_cell(&problem, k, trunc.clone(), opts)?);
                    }
                    let setup = vec![
                        fmt_num(cov),
                        label,
                        trunc.len().to_string(),
                        trunc.tensor_nnz(op.tensor()).to_string(),
                    ];
                    push(ReportRow { setup, cells }, &mut rows);
                }
            }
        }
    }
    Ok(Report {
        table,
        setup_columns: setup_columns.into_iter().map(String::from).collect(),
        preconditioners,
        rows,
    })
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Sparsity of the stochastic coupling under standard truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CPattern {
    /// Retained coefficient indices.
    pub retained: usize,
    /// Nonzero `(j, k)` positions of `sum_{i retained} |c_ijk|`.
    pub nnz: usize,
    /// Stored tensor entries with a retained `i`.
    pub n_mv: usize,
    /// Distinct `(i, k)` pairs, i.e. `K_i v_(k)` products per full block product.
    pub products: usize,
    /// The `(j, k)` positions, sorted.
    pub positions: Vec<(usize, usize)>,
}

impl CPattern {
    pub fn write_positions_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "j,k")?;
        for (j, k) in &self.positions {
            writeln!(out, "{j},{k}")?;
        }
        Ok(())
    }
}

pub fn emit_c_pattern(n: usize, p: usize, lt: usize) -> Result<CPattern> {
    let tensor = chaos::build_c_tensor(n, p, 2 * p)?;
    let trunc = TruncationSet::standard(n, lt, tensor.dims().0)?;
    let mut positions = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    let mut n_mv = 0;
    for &i in trunc.indices() {
        for e in tensor.slice(i) {
            positions.insert((e.j as usize, e.k as usize));
            pairs.insert((i, e.k));
            n_mv += 1;
        }
    }
    Ok(CPattern {
        retained: trunc.len(),
        nnz: positions.len(),
        n_mv,
        products: pairs.len(),
        positions: positions.into_iter().collect(),
    })
}

/// Norms of the stiffness matrices and the norm-weighted coupling.
#[derive(Debug, Clone)]
pub struct NormDecay {
    pub norms: Vec<f64>,
    /// `sum_i c_ijk |K_i|` over all coefficient indices.
    pub weighted: DenseMatrix,
    /// Total degree of each coefficient index.
    pub degrees: Vec<usize>,
}

impl NormDecay {
    pub fn write_norms_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "i,degree,norm")?;
        for (i, (n, d)) in self.norms.iter().zip(&self.degrees).enumerate() {
            writeln!(out, "{i},{d},{n:.16e}")?;
        }
        Ok(())
    }

    /// `j,k,log10_weighted` for every nonzero position.
    pub fn write_weighted_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "j,k,log10_weighted")?;
        for j in 0..self.weighted.rows() {
            for k in 0..self.weighted.cols() {
                let v = self.weighted[(j, k)];
                if v > 0.0 {
                    writeln!(out, "{j},{k},{:.6}", v.log10())?;
                }
            }
        }
        Ok(())
    }
}

pub fn emit_norm_decay(cfg: &ExperimentConfig) -> Result<NormDecay> {
    let problem = StochasticProblem::build(&cfg.base)?;
    let op = &problem.operator;
    let norms = op.stiffness_norms(cfg.norm);
    let nb = op.num_blocks();
    let mut weighted = DenseMatrix::zeros(nb, nb);
    for e in op.tensor().entries() {
        weighted[(e.j as usize, e.k as usize)] += e.value.abs() * norms[e.i as usize];
    }
    let coeff_basis = MultiIndexSet::new(cfg.base.n_stoch, cfg.base.coeff_order)?;
    let degrees = (0..coeff_basis.len()).map(|i| coeff_basis.total_degree(i)).collect();
    Ok(NormDecay {
        norms,
        weighted,
        degrees,
    })
}

/// Writes the building blocks of one instance for external checks.
///
/// Files: `K_<i>.mtx`, `cijk.txt`, `load.txt`, `mesh.csv`, `kl.csv` and,
/// when `global` is set, `global.mtx`. The global matrix is refused above
/// `cap` unknowns before anything is written.
pub fn export_case(cfg: &ProblemConfig, dir: &Path, global: bool, cap: usize) -> Result<Vec<PathBuf>> {
    let problem = StochasticProblem::build(cfg)?;
    let op = &problem.operator;
    if global && op.global_dim() > cap {
        return Err(Error::CapExceeded {
            required: op.global_dim(),
            cap,
        });
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let width = op.num_coeffs().saturating_sub(1).to_string().len();
    for (i, k) in op.stiffness_all().iter().enumerate() {
        let path = dir.join(format!("K_{i:0width$}.mtx"));
        mtx::save_mtx(&path, k, MtxSymmetry::General)?;
        written.push(path);
    }
    let path = dir.join("cijk.txt");
    op.tensor().save_triples(&path)?;
    written.push(path);

    let path = dir.join("load.txt");
    let mut text = String::new();
    for v in &problem.load {
        text.push_str(&format!("{v:.16e}\n"));
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join("mesh.csv");
    problem.mesh.save_csv(&path)?;
    written.push(path);
    let path = dir.join("kl.csv");
    problem.kl.save_csv(&problem.mesh, &path)?;
    written.push(path);

    if global {
        let dense = op.assemble_global_dense(cap)?;
        let path = dir.join("global.mtx");
        mtx::save_mtx(&path, &CsrMatrix::from_dense(&dense, 0.0), MtxSymmetry::General)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a load vector written by [`export_case`].
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("bad number '{l}'"),
            })
        })
        .collect()
}
