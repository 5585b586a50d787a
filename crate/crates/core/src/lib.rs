//! Stochastic Galerkin finite elements for diffusion with a lognormal
//! coefficient, with hierarchical and block preconditioners.

pub mod chaos;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod field;
pub mod galerkin;
pub mod krylov;
pub mod linalg;
pub mod precond;
pub mod problem;

pub use chaos::{build_c_tensor, CijkTensor, MultiIndexSet};
pub use error::{Error, Result};
pub use fem::Mesh;
pub use experiments::{ExperimentConfig, Report, ReportRow, TableKind};
pub use field::{KlExpansion, KlMethod, SigmaMode};
pub use galerkin::{GalerkinOperator, LevelMap, NormKind, TruncationKind, TruncationSet};
pub use krylov::{CgVariant, SolveOptions, SolveReport};
pub use linalg::{CsrMatrix, DenseMatrix, Factorization, LinearOperator};
pub use precond::{LevelSolve, PrecondKind, Preconditioner};
pub use problem::{ProblemConfig, StochasticProblem};
