use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sg_core::experiments::{self, ExperimentConfig, TableKind};
use sg_core::krylov::{self, SolveOptions};
use sg_core::precond::{LevelSolve, PrecondKind, Preconditioner};
use sg_core::{StochasticProblem, TruncationSet};

#[derive(Parser, Debug)]
#[command(name = "sg", version, about = "Stochastic Galerkin preconditioner experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one of the parameter sweeps.
    Tables {
        /// logN, logP, logCoV, logh, trunc-std or trunc-adapt.
        which: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
    },
    /// Sparsity counts of the truncated coupling tensor.
    Cpattern {
        #[arg(long = "N", default_value_t = 4)]
        n: usize,
        #[arg(long = "P", default_value_t = 4)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        lt: usize,
        /// Also write the nonzero (j,k) positions to this CSV.
        #[arg(long)]
        positions: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Stiffness-matrix norms and the norm-weighted coupling.
    Norms {
        #[command(flatten)]
        common: Common,
        /// CSV for the weighted (j,k) matrix.
        #[arg(long)]
        weighted: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Write matrices, tensor, load and mesh of one instance.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dir: PathBuf,
        /// Include the assembled global matrix.
        #[arg(long)]
        global: bool,
        #[arg(long, default_value_t = 5000)]
        cap: usize,
    },
    /// Solve one system with one preconditioner.
    Solve {
        #[arg(long, default_value = "hs")]
        precond: String,
        /// Standard truncation degree.
        #[arg(long, conflicts_with = "tau")]
        lt: Option<usize>,
        /// Adaptive truncation threshold.
        #[arg(long)]
        tau: Option<f64>,
        /// Inner CG tolerance for the hS level solves.
        #[arg(long)]
        inner_tol: Option<f64>,
        /// Per-iteration residual CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value settings, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Stochastic dimension.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Solution chaos degree; the coefficient degree is twice this.
    #[arg(long = "P")]
    p: Option<usize>,
    /// Elements per side.
    #[arg(long)]
    mesh: Option<usize>,
    /// Coefficient of variation in percent.
    #[arg(long)]
    cov: Option<f64>,
    /// Relative residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration limit.
    #[arg(long)]
    maxit: Option<usize>,
    /// moment-match or gaussian-sigma.
    #[arg(long)]
    sigma_mode: Option<String>,
    /// separable or dense.
    #[arg(long)]
    kl_method: Option<String>,
    /// frob or two.
    #[arg(long)]
    norm: Option<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let flags: [(&str, Option<String>); 9] = [
            ("N", self.n.map(|v| v.to_string())),
            ("P", self.p.map(|v| v.to_string())),
            ("mesh", self.mesh.map(|v| v.to_string())),
            ("cov", self.cov.map(|v| v.to_string())),
            ("tol", self.tol.map(|v| v.to_string())),
            ("maxit", self.maxit.map(|v| v.to_string())),
            ("sigma_mode", self.sigma_mode.clone()),
            ("kl_method", self.kl_method.clone()),
            ("norm", self.norm.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Copy, Clone, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Markdown,
}

#[derive(Args, Debug, Default)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Output {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Tables { which, common, output } => {
            let table: TableKind = which.parse()?;
            let cfg = common.config()?;
            let report = experiments::run_table_with(&cfg, table, |row| {
                eprintln!("{table}: {} done", row.setup.join(" "));
            })?;
            let mut w = output.writer()?;
            match output.format {
                Format::Csv => report.write_csv(&mut w)?,
                Format::Markdown => report.write_markdown(&mut w)?,
            }
            w.flush()?;
        }
        Command::Cpattern { n, p, lt, positions, output } => {
            if lt > 2 * p {
                bail!("lt = {lt} exceeds the coefficient degree {}", 2 * p);
            }
            let c = experiments::emit_c_pattern(n, p, lt)?;
            let mut w = output.writer()?;
            writeln!(w, "N,P,lt,Mt+1,nnz,n_MV,products")?;
            writeln!(w, "{n},{p},{lt},{},{},{},{}", c.retained, c.nnz, c.n_mv, c.products)?;
            w.flush()?;
            if let Some(path) = positions {
                let mut f = create(&path)?;
                c.write_positions_csv(&mut f)?;
                f.flush()?;
            }
        }
        Command::Norms { common, weighted, output } => {
            let cfg = common.config()?;
            let decay = experiments::emit_norm_decay(&cfg)?;
            let mut w = output.writer()?;
            decay.write_norms_csv(&mut w)?;
            w.flush()?;
            if let Some(path) = weighted {
                let mut f = create(&path)?;
                decay.write_weighted_csv(&mut f)?;
                f.flush()?;
            }
        }
        Command::Export { common, dir, global, cap } => {
            let cfg = common.config()?;
            let files = experiments::export_case(&cfg.base, &dir, global, cap)?;
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::Solve { precond, lt, tau, inner_tol, trace, common, output } => {
            let cfg = common.config()?;
            let kind: PrecondKind = precond.parse()?;
            let problem = StochasticProblem::build(&cfg.base)?;
            let op = &problem.operator;
            let trunc = match (lt, tau) {
                (Some(lt), _) => TruncationSet::standard(cfg.base.n_stoch, lt, op.num_coeffs())?,
                (None, Some(tau)) => {
                    TruncationSet::adaptive(tau, &op.stiffness_norms(cfg.norm), op.tensor())?
                }
                (None, None) => op.full_truncation().clone(),
            };
            let retained = trunc.len();
            let mut m = Preconditioner::new(op, kind, trunc)?;
            if let Some(tol) = inner_tol {
                m = m.with_level_solve(LevelSolve::InnerCg { tol, maxit: cfg.solve.maxit })?;
            }
            let opts = SolveOptions { tol: cfg.solve.tol, maxit: cfg.solve.maxit, ..SolveOptions::default() };
            op.reset_stats();
            let (_, rep) = krylov::flexible_cg(op, &m, &problem.rhs(), &opts);
            let stats = op.stats();
            let mut w = output.writer()?;
            writeln!(w, "precond,ndof,retained,iterations,kappa,converged,relres,products,seconds")?;
            writeln!(
                w,
                "{},{},{},{},{:.4},{},{:.3e},{},{:.3}",
                kind,
                op.global_dim(),
                retained,
                rep.iterations,
                rep.kappa,
                rep.converged,
                rep.final_residual(),
                stats.products,
                rep.wall_time.as_secs_f64()
            )?;
            w.flush()?;
            if let Some(path) = trace {
                rep.save_trace(&path)?;
            }
        }
    }
    Ok(())
}
