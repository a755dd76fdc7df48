use std::sync::Arc;

use super::{element_coefficients, StateProblem, StateSolution};
use crate::error::{Error, Result};
use crate::fem::{apply_dirichlet, NodalField, P1Space};
use crate::linsys::{dot, solve_spd_from, SolverOptions};
use crate::material::KappaParams;
use crate::mesh::BoundaryTag;

/// `-div(kappa(rho) grad u) = f` in the domain, `u = 0` on Gamma0,
/// `kappa du/dn = g` on Gamma1, insulated elsewhere.
pub struct HeatProblem {
    space: Arc<P1Space>,
    kappa: KappaParams,
    source: f64,
    flux: f64,
    dirichlet: Vec<usize>,
    load: Vec<f64>,
    solver: SolverOptions,
}

impl HeatProblem {
    pub fn new(space: Arc<P1Space>, kappa: KappaParams, source: f64, flux: f64) -> Result<Self> {
        kappa.validate()?;
        let dirichlet = space.mesh().nodes_tagged(BoundaryTag::Gamma0);
        if dirichlet.is_empty() {
            return Err(Error::EmptyDirichlet);
        }
        let load = space.scalar_load(source, flux);
        Ok(Self {
            space,
            kappa,
            source,
            flux,
            dirichlet,
            load,
            solver: SolverOptions::robust(),
        })
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn source(&self) -> f64 {
        self.source
    }

    pub fn flux(&self) -> f64 {
        self.flux
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn shared_space(&self) -> Arc<P1Space> {
        Arc::clone(&self.space)
    }
}

impl StateProblem for HeatProblem {
    fn space(&self) -> &P1Space {
        &self.space
    }

    fn kappa(&self) -> &KappaParams {
        &self.kappa
    }

    fn solve_state_with(
        &self,
        rho: &[f64],
        floor: f64,
        guess: Option<&[f64]>,
    ) -> Result<StateSolution> {
        let (coeff, clamped_elements) = element_coefficients(&self.space, &self.kappa, rho, floor)?;
        let k = self.space.stiffness(&coeff)?;
        let (a, b) = apply_dirichlet(&k, &self.load, &self.dirichlet)?;
        let (u, report) = solve_spd_from(&a, &b, guess, &self.solver)?;
        let objective = 0.5 * dot(&self.load, &u);
        Ok(StateSolution {
            u: NodalField::scalar(u),
            objective,
            report,
            clamped_elements,
        })
    }

    fn element_energy(&self, state: &StateSolution) -> Result<Vec<f64>> {
        Ok(self
            .space
            .element_gradients(&state.u.values)?
            .iter()
            .map(|g| g[0] * g[0] + g[1] * g[1])
            .collect())
    }
}
