//! Density-dependent state problems: scalar heat conduction and plane
//! linear elasticity. Both minimize the sign-inverted potential energy
//! `J = 1/2 F.u`, which equals the weighted energy `1/2 u^T K(kappa) u` at the
//! discrete solution.

mod elastic;
mod heat;

pub use elastic::ElasticProblem;
pub use heat::HeatProblem;

use crate::error::Result;
use crate::fem::{NodalField, P1Space};
use crate::linsys::SolveReport;
use crate::material::KappaParams;

#[derive(Debug, Clone)]
pub struct StateSolution {
    pub u: NodalField,
    /// `1/2 F.u`.
    pub objective: f64,
    pub report: SolveReport,
    /// Elements whose averaged density was raised to the floor.
    pub clamped_elements: usize,
}

/// Common interface the optimization loop drives.
pub trait StateProblem: Send + Sync {
    fn space(&self) -> &P1Space;

    fn kappa(&self) -> &KappaParams;

    /// Solves the state equation for the nodal density `rho`, evaluating the
    /// material law on element-averaged densities raised to `floor`.
    fn solve_state_with(
        &self,
        rho: &[f64],
        floor: f64,
        guess: Option<&[f64]>,
    ) -> Result<StateSolution>;

    /// Per-element energy density of the state: `|grad u|^2` for heat,
    /// `eps(u) : sigma(u)` for elasticity.
    fn element_energy(&self, state: &StateSolution) -> Result<Vec<f64>>;

    fn solve_state(&self, rho: &[f64]) -> Result<StateSolution> {
        self.solve_state_with(rho, crate::material::DEFAULT_DENSITY_FLOOR, None)
    }

    /// Nodal sensitivity `scale * kappa'(rho_T) * energy_T`, projected to
    /// the nodes.
    fn sensitivity_with(&self, rho: &[f64], state: &StateSolution, floor: f64) -> Result<Vec<f64>> {
        let space = self.space();
        let kappa = self.kappa();
        let (rho_elem, _) = element_densities(space, rho, floor)?;
        let energy = self.element_energy(state)?;
        let element: Vec<f64> = rho_elem
            .iter()
            .zip(&energy)
            .map(|(&r, &e)| Ok(kappa.sensitivity_scale * kappa.kappa_prime(r)? * e))
            .collect::<Result<_>>()?;
        space.project_to_nodes(&element)
    }

    fn sensitivity(&self, rho: &[f64], state: &StateSolution) -> Result<Vec<f64>> {
        self.sensitivity_with(rho, state, crate::material::DEFAULT_DENSITY_FLOOR)
    }
}

/// Element-averaged densities raised to `floor`, with the number of raised
/// elements.
pub fn element_densities(space: &P1Space, rho: &[f64], floor: f64) -> Result<(Vec<f64>, usize)> {
    let mut averaged = space.element_average(rho)?;
    let mut clamped = 0;
    for r in &mut averaged {
        if *r < floor {
            *r = floor;
            clamped += 1;
        }
    }
    Ok((averaged, clamped))
}

pub(crate) fn element_coefficients(
    space: &P1Space,
    kappa: &KappaParams,
    rho: &[f64],
    floor: f64,
) -> Result<(Vec<f64>, usize)> {
    let (rho_elem, clamped) = element_densities(space, rho, floor)?;
    let coeff = rho_elem
        .iter()
        .map(|&r| kappa.kappa(r))
        .collect::<Result<_>>()?;
    Ok((coeff, clamped))
}
