//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a criterion fails that is not listed in `KNOWN_FAILURES`.

mod common;

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use sg_core::experiments::{emit_c_pattern, solve_cell, Cell};
use sg_core::krylov::{conjugate_gradient, flexible_cg};
use sg_core::linalg::{probe, sym_eig, DenseMatrix};
use sg_core::{
    CgVariant, MultiIndexSet, PrecondKind, Preconditioner, ProblemConfig, SolveOptions, StochasticProblem,
    TruncationSet,
};

/// Criteria that fail with the current model and why; they are reported
/// as FAIL but do not fail the run.
const KNOWN_FAILURES: &[(usize, &str)] = &[(
    8,
    "counts of mb, K, ahS and ahGS drift by more than 4 between n=5 and n=20, mostly at n=5",
)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Solves with all six preconditioners on the N=P=4 desk problem.
#[derive(Default)]
struct DeskRuns {
    cache: HashMap<(usize, u32), Vec<Cell>>,
}

impl DeskRuns {
    fn cells(&mut self, mesh: usize, cov_pct: u32, kinds: &[PrecondKind]) -> HashMap<PrecondKind, Cell> {
        let key = (mesh, cov_pct);
        if !self.cache.contains_key(&key) {
            let p = StochasticProblem::build(&ProblemConfig::new(4, 4, mesh, cov_pct as f64 / 100.0)).unwrap();
            let opts = SolveOptions::default();
            let cells = PrecondKind::ALL
                .iter()
                .map(|&k| {
                    if kinds.contains(&k) {
                        solve_cell(&p, k, p.operator.full_truncation().clone(), &opts).unwrap()
                    } else {
                        Cell { iterations: 0, kappa: 0.0, converged: false }
                    }
                })
                .collect();
            self.cache.insert(key, cells);
        }
        PrecondKind::ALL
            .iter()
            .zip(&self.cache[&key])
            .filter(|(k, _)| kinds.contains(k))
            .map(|(&k, &c)| (k, c))
            .collect()
    }
}

fn instances() -> Vec<StochasticProblem> {
    small_instances().into_iter().map(|(n, p, m)| problem(n, p, m, 1.0)).collect()
}

fn c1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for p in 1..=2 {
            worst = worst.max(tensor_quadrature_error(n, p, 2 * p));
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-10 && t < Duration::from_secs(10),
        format!("tensor vs Gauss-Hermite, N<=3, P'<=4: max error {worst:.1e}, {:.2} s", t.as_secs_f64()),
    )
}

fn c2() -> Outcome {
    let lts = [0, 1, 2, 3, 4, 8];
    let nnz_ref = [70, 350, 1070, 1990, 3090, 4900];
    let nmv_ref = [70, 350, 1210, 2610, 4980, 12585];
    let size_ref = [1, 5, 15, 35, 70, 495];
    let mut got = (Vec::new(), Vec::new(), Vec::new());
    for &lt in &lts {
        let c = emit_c_pattern(4, 4, lt).unwrap();
        got.0.push(c.nnz);
        got.1.push(c.n_mv);
        got.2.push(TruncationSet::standard(4, lt, 495).unwrap().len());
    }
    let pass = got.0 == nnz_ref && got.1 == nmv_ref && got.2 == size_ref;
    outcome(pass, format!("nnz {:?}, n_MV {:?}, sizes {:?}", got.0, got.1, got.2))
}

fn c3(probs: &[StochasticProblem]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (s, p) in probs.iter().enumerate() {
        let op = &p.operator;
        let a = op.assemble_global_dense(10_000).unwrap();
        for t in 0..3 {
            let v = seeded_vector(op.global_dim(), 10 * s as u64 + t);
            let mut w = vec![0.0; v.len()];
            op.matvec(&v, &mut w).unwrap();
            let expect = a.matvec(&v).unwrap();
            let num: f64 = w.iter().zip(&expect).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let den: f64 = expect.iter().map(|y| y * y).sum::<f64>().sqrt();
            worst = worst.max(num / den);
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-12 && t < Duration::from_secs(5),
        format!("tmatvec vs assembled product: max relative error {worst:.1e}, {:.2} s", t.as_secs_f64()),
    )
}

fn c4(probs: &[StochasticProblem]) -> Outcome {
    let (mut gs, mut kron, mut hs): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for p in probs {
        let op = &p.operator;
        let a = op.assemble_global_dense(10_000).unwrap();
        let full = op.full_truncation().clone();
        gs = gs.max(rel_diff(&probe_of(op, PrecondKind::GaussSeidel, full.clone()), &dense_gs_inverse(op, &a)));
        kron = kron.max(rel_diff(&probe_of(op, PrecondKind::Kronecker, full.clone()), &dense_kron_inverse(op)));
        hs = hs.max(rel_diff(&probe_of(op, PrecondKind::HierSchur, full), &dense_hs_inverse(op, &a)));
    }
    outcome(
        gs.max(kron).max(hs) <= 1e-11,
        format!("dense oracles: GS {gs:.1e}, K {kron:.1e}, hS {hs:.1e}"),
    )
}

fn c5(probs: &[StochasticProblem]) -> Outcome {
    let mut worst: f64 = 0.0;
    for p in probs {
        let op = &p.operator;
        let t0 = || TruncationSet::standard(p.config.n_stoch, 0, op.num_coeffs()).unwrap();
        let ahs = probe_of(op, PrecondKind::ApproxHierSchur, t0());
        let gs = probe_of(op, PrecondKind::GaussSeidel, t0());
        let ahgs = probe_of(op, PrecondKind::ApproxHierGs, t0());
        worst = worst.max(rel_diff(&gs, &ahs)).max(rel_diff(&ahgs, &ahs));
    }
    outcome(worst <= 1e-12, format!("lt=0 ahS/GS/ahGS probes differ by {worst:.1e}"))
}

fn c6(probs: &[StochasticProblem]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_kind = PrecondKind::MeanBased;
    for (s, p) in probs.iter().enumerate() {
        let op = &p.operator;
        let top = 2 * p.config.order;
        for lt in 0..=top {
            let trunc = TruncationSet::standard(p.config.n_stoch, lt, op.num_coeffs()).unwrap();
            for kind in PrecondKind::ALL {
                let m = Preconditioner::new(op, kind, trunc.clone()).unwrap();
                let d = symmetry_defect(&m, 100 * s as u64 + lt as u64);
                if d > worst {
                    worst = d;
                    worst_kind = kind;
                }
            }
        }
    }
    outcome(worst <= 1e-10, format!("largest symmetry defect {worst:.1e} ({worst_kind})"))
}

fn c7(runs: &mut DeskRuns) -> Outcome {
    let start = Instant::now();
    let c = runs.cells(10, 100, &PrecondKind::ALL);
    let t = start.elapsed();
    let reference = [66usize, 37, 16, 38, 19, 19];
    let it = |k: PrecondKind| c[&k].iterations;
    let mut band = true;
    let mut parts = Vec::new();
    for (k, &r) in PrecondKind::ALL.iter().zip(&reference) {
        let i = it(*k);
        band &= c[k].converged && (i as f64 - r as f64).abs() <= 0.25 * r as f64;
        parts.push(format!("{k} {i} ({r})"));
    }
    use PrecondKind::*;
    let order = it(HierSchur) <= it(GaussSeidel)
        && it(GaussSeidel) <= it(ApproxHierGs)
        && it(ApproxHierGs) < it(Kronecker)
        && it(Kronecker) < it(MeanBased)
        && it(ApproxHierSchur) > it(GaussSeidel);
    outcome(
        band && order && t < Duration::from_secs(300),
        format!(
            "n=10 CoV=100%: {}; bands {}, ordering {}, {:.1} s",
            parts.join(", "),
            if band { "ok" } else { "missed" },
            if order { "ok" } else { "violated" },
            t.as_secs_f64()
        ),
    )
}

fn c8(runs: &mut DeskRuns) -> Outcome {
    let meshes = [5, 10, 15, 20];
    let per_mesh: Vec<_> = meshes.iter().map(|&n| runs.cells(n, 100, &PrecondKind::ALL)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for k in PrecondKind::ALL {
        let its: Vec<usize> = per_mesh.iter().map(|c| c[&k].iterations).collect();
        let spread = its.iter().max().unwrap() - its.iter().min().unwrap();
        pass &= spread <= 4;
        parts.push(format!(
            "{k} {} (spread {spread})",
            its.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("/")
        ));
    }
    outcome(pass, format!("n=5/10/15/20: {}", parts.join(", ")))
}

fn c9(runs: &mut DeskRuns) -> Outcome {
    use PrecondKind::*;
    let kinds = [MeanBased, HierSchur, GaussSeidel, ApproxHierGs];
    let covs = [25, 50, 75, 100];
    let mb: Vec<usize> = covs.iter().map(|&c| runs.cells(10, c, &kinds)[&MeanBased].iterations).collect();
    let low = runs.cells(10, 25, &kinds);
    let rising = mb.windows(2).all(|w| w[0] < w[1]);
    let small = [HierSchur, GaussSeidel, ApproxHierGs].iter().all(|k| low[k].converged && low[k].iterations <= 12);
    outcome(
        rising && small,
        format!(
            "mb over CoV 25/50/75/100: {:?}; at 25%: hS {}, GS {}, ahGS {}",
            mb, low[&HierSchur].iterations, low[&GaussSeidel].iterations, low[&ApproxHierGs].iterations
        ),
    )
}

fn c10(probs: &[StochasticProblem]) -> Outcome {
    let opts = SolveOptions::default();
    let mut mismatches = Vec::new();
    let mut total = 0;
    for (s, p) in probs.iter().enumerate() {
        let op = &p.operator;
        for kind in PrecondKind::ALL {
            let m = Preconditioner::full(op, kind).unwrap();
            let (_, f) = conjugate_gradient(op, &m, &p.rhs(), &opts, CgVariant::Flexible);
            let (_, c) = conjugate_gradient(op, &m, &p.rhs(), &opts, CgVariant::Standard);
            total += 1;
            if f.iterations != c.iterations || !f.converged {
                mismatches.push(format!("instance {s} {kind}: {} vs {}", f.iterations, c.iterations));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("FCG and PCG iteration counts agree in {total} solves")
        } else {
            mismatches.join("; ")
        },
    )
}

/// Symmetric square root through the eigendecomposition.
fn sqrt_spd(a: &DenseMatrix) -> DenseMatrix {
    let e = sym_eig(a).unwrap();
    let n = a.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for (k, &l) in e.values.iter().enumerate() {
        let v = e.vector(k);
        let s = l.sqrt();
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] += s * v[r] * v[c];
            }
        }
    }
    out
}

fn c11(probs: &[StochasticProblem]) -> Outcome {
    let opts = SolveOptions { tol: 1e-10, ..SolveOptions::default() };
    let mut worst: f64 = 0.0;
    let mut at = String::new();
    for (s, p) in probs.iter().enumerate() {
        let op = &p.operator;
        let nd = op.n_dof();
        let interior: Vec<usize> = (0..op.global_dim()).filter(|&g| !p.mesh.is_boundary(g % nd)).collect();
        let a = op.assemble_global_dense(10_000).unwrap().select(&interior, &interior);
        let root = sqrt_spd(&a);
        let noise = seeded_vector(op.global_dim(), 900 + s as u64);
        let mut b = vec![0.0; op.global_dim()];
        for &g in &interior {
            b[g] = noise[g];
        }
        for kind in PrecondKind::ALL {
            let m = Preconditioner::full(op, kind).unwrap();
            let minv = probe(&m).select(&interior, &interior);
            let mut sym = root.matmul(&minv).unwrap().matmul(&root).unwrap();
            sym.symmetrize();
            let eig = sym_eig(&sym).unwrap();
            let (lo, hi) = eig
                .values
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let exact = hi / lo;
            let (_, rep) = flexible_cg(op, &m, &b, &opts);
            let rel = (rep.kappa - exact).abs() / exact;
            if rel >= worst {
                worst = rel;
                at = format!("instance {s} {kind}: {:.4} vs {:.4}", rep.kappa, exact);
            }
        }
    }
    outcome(worst <= 0.05, format!("worst Lanczos kappa error {:.2}% ({at})", 100.0 * worst))
}

fn c12() -> Outcome {
    let p = problem(2, 1, 5, 1.0);
    let kl = &p.kl;
    let xis: Vec<[f64; 2]> = (0..10)
        .map(|t| {
            let a = t as f64 * 0.7;
            [2.0 * a.sin(), 2.0 * (1.3 * a + 0.4).cos()]
        })
        .collect();
    let mut errors = Vec::new();
    for pc in [2, 4, 6, 8] {
        let basis = MultiIndexSet::new(2, pc).unwrap();
        let mut worst: f64 = 0.0;
        for node in 0..p.mesh.num_nodes() {
            let g = [kl.mode(0)[node], kl.mode(1)[node]];
            let k = sg_core::field::gpc_coefficients_at(kl.g0(), &g, &basis);
            for xi in &xis {
                let approx: f64 = basis.eval_all(xi).iter().zip(&k).map(|(psi, ki)| psi * ki).sum();
                let exact = (kl.g0() + g[0] * xi[0] + g[1] * xi[1]).exp();
                worst = worst.max((approx - exact).abs() / exact);
            }
        }
        errors.push(worst);
    }
    let pass = errors.windows(2).all(|w| w[1] < w[0]);
    outcome(
        pass,
        format!(
            "max relative error for P'=2/4/6/8: {}",
            errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let probs = instances();
    let mut runs = DeskRuns::default();
    let mut unexpected = Vec::new();
    let mut passed = 0;
    let names = [
        "tensor oracle",
        "count reproduction",
        "operator oracle",
        "preconditioner oracles",
        "lt=0 coincidence",
        "symmetry probes",
        "desk-scale bands",
        "mesh robustness",
        "CoV trend",
        "FCG/PCG agreement",
        "kappa estimator",
        "lognormal expansion",
    ];
    for (idx, name) in names.iter().enumerate() {
        let id = idx + 1;
        let start = Instant::now();
        let o = match id {
            1 => c1(),
            2 => c2(),
            3 => c3(&probs),
            4 => c4(&probs),
            5 => c5(&probs),
            6 => c6(&probs),
            7 => c7(&mut runs),
            8 => c8(&mut runs),
            9 => c9(&mut runs),
            10 => c10(&probs),
            11 => c11(&probs),
            _ => c12(),
        };
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == id);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] criterion {id:>2} {name}: {} [{:.1} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        match (o.pass, known) {
            (true, _) => passed += 1,
            (false, Some((_, why))) => println!("       known failure: {why}"),
            (false, None) => unexpected.push(id),
        }
        if o.pass && known.is_some() {
            println!("       listed as a known failure but passed; update KNOWN_FAILURES");
        }
    }
    println!("acceptance: {passed}/{} criteria passed", names.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
