//! End-to-end construction of the stochastic Galerkin system for
//! `-div(k grad u) = f` on the unit square with a lognormal `k`.

use crate::chaos::{CijkTensor, MultiIndexSet};
use crate::error::{Error, Result};
use crate::fem::{self, Mesh, StiffnessAssembler};
use crate::field::{self, CovarianceSpec, KlExpansion, KlMethod, SigmaMode};
use crate::galerkin::GalerkinOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    /// Stochastic dimension `N`.
    pub n_stoch: usize,
    /// Solution chaos degree `P`.
    pub order: usize,
    /// Coefficient chaos degree `P'`, `2P` unless overridden.
    pub coeff_order: usize,
    /// Elements per side.
    pub mesh: usize,
    pub mean: f64,
    /// Coefficient of variation as a fraction (1.0 is 100%).
    pub cov: f64,
    pub corr_len: f64,
    pub sigma_mode: SigmaMode,
    pub kl_method: KlMethod,
    /// Elements per side of the grid the KL is solved on; the FE mesh if `None`.
    pub kl_grid: Option<usize>,
    /// Constant source term.
    pub source: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            n_stoch: 4,
            order: 4,
            coeff_order: 8,
            mesh: 10,
            mean: 1.0,
            cov: 1.0,
            corr_len: 0.5,
            sigma_mode: SigmaMode::MomentMatch,
            kl_method: KlMethod::Separable,
            kl_grid: None,
            source: 1.0,
        }
    }
}

impl ProblemConfig {
    pub fn new(n_stoch: usize, order: usize, mesh: usize, cov: f64) -> Self {
        Self {
            n_stoch,
            order,
            coeff_order: 2 * order,
            mesh,
            cov,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_stoch == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if self.mesh == 0 {
            return Err(Error::InvalidArgument("mesh must have at least one element".into()));
        }
        if self.coeff_order < self.order {
            return Err(Error::InvalidArgument(format!(
                "coefficient degree {} is below solution degree {}",
                self.coeff_order, self.order
            )));
        }
        Ok(())
    }
}

/// Everything built from a [`ProblemConfig`].
#[derive(Debug)]
pub struct StochasticProblem {
    pub config: ProblemConfig,
    pub mesh: Mesh,
    pub kl: KlExpansion,
    /// Deterministic load with the Dirichlet rows zeroed.
    pub load: Vec<f64>,
    pub operator: GalerkinOperator,
}

impl StochasticProblem {
    pub fn build(config: &ProblemConfig) -> Result<Self> {
        config.validate()?;
        let mesh = Mesh::new(config.mesh)?;
        let (g0, sigma) = field::gaussian_parameters(config.mean, config.cov, config.sigma_mode)?;
        let spec = CovarianceSpec::new(sigma, config.corr_len)?;
        let kl = match (config.kl_method, config.kl_grid) {
            (KlMethod::Dense, None) => field::discrete_kl(&mesh, &spec, config.n_stoch, g0)?,
            (KlMethod::Dense, Some(n)) => field::discrete_kl(&Mesh::new(n)?, &spec, config.n_stoch, g0)?,
            (KlMethod::Separable, grid) => {
                field::separable_kl(grid.unwrap_or(config.mesh), &spec, config.n_stoch, g0)?
            }
        };

        let coeff_basis = MultiIndexSet::new(config.n_stoch, config.coeff_order)?;
        let basis = MultiIndexSet::new(config.n_stoch, config.order)?;
        let fields = field::gpc_coefficients(&kl, &coeff_basis, &mesh)?;

        let assembler = StiffnessAssembler::new(&mesh);
        let mut load = fem::assemble_load(&mesh, config.source);
        let mut stiffness = Vec::with_capacity(fields.len());
        for i in 0..fields.len() {
            let mut k = assembler.assemble(fields.field(i))?;
            if i == 0 {
                fem::apply_dirichlet(&mut k, &mut load, &mesh);
            } else {
                fem::clear_dirichlet(&mut k, &mesh);
            }
            stiffness.push(k);
        }
        let tensor = CijkTensor::build(&coeff_basis, &basis)?;
        let operator = GalerkinOperator::new(stiffness, tensor, basis)?;
        Ok(Self {
            config: config.clone(),
            mesh,
            kl,
            load,
            operator,
        })
    }

    /// Global right-hand side; the load enters block 0 only.
    pub fn rhs(&self) -> Vec<f64> {
        self.operator
            .deterministic_rhs(&self.load)
            .expect("load has one entry per node")
    }
}
