use std::sync::Arc;

use super::{element_coefficients, StateProblem, StateSolution};
use crate::error::{Error, Result};
use crate::fem::{apply_dirichlet, LameParameters, NodalField, P1Space};
use crate::linsys::{dot, solve_spd_from, SolverOptions};
use crate::material::KappaParams;
use crate::mesh::BoundaryTag;

/// Plane Lamé system `-div(kappa(rho) sigma(u)) = f`, clamped on Gamma0,
/// traction `g` on Gamma1, traction free elsewhere.
pub struct ElasticProblem {
    space: Arc<P1Space>,
    kappa: KappaParams,
    lame: LameParameters,
    body_force: [f64; 2],
    traction: [f64; 2],
    dirichlet: Vec<usize>,
    load: Vec<f64>,
    solver: SolverOptions,
}

impl ElasticProblem {
    pub fn new(
        space: Arc<P1Space>,
        kappa: KappaParams,
        lame: LameParameters,
        body_force: [f64; 2],
        traction: [f64; 2],
    ) -> Result<Self> {
        kappa.validate()?;
        let lame = LameParameters::new(lame.lambda1, lame.lambda2)?;
        let dirichlet: Vec<usize> = space
            .mesh()
            .nodes_tagged(BoundaryTag::Gamma0)
            .into_iter()
            .flat_map(|n| [2 * n, 2 * n + 1])
            .collect();
        if dirichlet.is_empty() {
            return Err(Error::EmptyDirichlet);
        }
        let load = space.vector_load(body_force, traction);
        Ok(Self {
            space,
            kappa,
            lame,
            body_force,
            traction,
            dirichlet,
            load,
            solver: SolverOptions::robust(),
        })
    }

    /// Replaces the fully clamped Gamma0 constraint with an explicit list of
    /// constrained degrees of freedom (`2 * node + component`).
    pub fn with_constrained_dofs(mut self, dofs: Vec<usize>) -> Result<Self> {
        if dofs.is_empty() {
            return Err(Error::EmptyDirichlet);
        }
        self.dirichlet = dofs;
        Ok(self)
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn lame(&self) -> LameParameters {
        self.lame
    }

    pub fn body_force(&self) -> [f64; 2] {
        self.body_force
    }

    pub fn traction(&self) -> [f64; 2] {
        self.traction
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn shared_space(&self) -> Arc<P1Space> {
        Arc::clone(&self.space)
    }
}

impl StateProblem for ElasticProblem {
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
        let k = self.space.elastic_stiffness(&coeff, self.lame)?;
        let (a, b) = apply_dirichlet(&k, &self.load, &self.dirichlet)?;
        let (u, report) = solve_spd_from(&a, &b, guess, &self.solver)?;
        let objective = 0.5 * dot(&self.load, &u);
        Ok(StateSolution {
            u: NodalField::vector(u),
            objective,
            report,
            clamped_elements,
        })
    }

    fn element_energy(&self, state: &StateSolution) -> Result<Vec<f64>> {
        Ok(self
            .space
            .element_strains(&state.u.values)?
            .iter()
            .map(|eps| self.lame.energy_density(eps))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundarySpec, Mesh, Segment, Side};

    fn lame() -> LameParameters {
        LameParameters::new(15.0 / 26.0, 5.0 / 13.0).unwrap()
    }

    #[test]
    fn no_loads_no_displacement() {
        let mesh = Mesh::rectangle(2.0, 1.0, 4, 2)
            .unwrap()
            .tag_boundary(&BoundarySpec::new(vec![Segment::new(
                Side::Left,
                0.0,
                1.0,
                BoundaryTag::Gamma0,
            )]))
            .unwrap();
        let prob = ElasticProblem::new(
            Arc::new(P1Space::new(mesh)),
            KappaParams::elastic_default(),
            lame(),
            [0.0, 0.0],
            [0.0, 0.0],
        )
        .unwrap();
        let rho = vec![2.0; 15];
        let state = prob.solve_state(&rho).unwrap();
        assert!(state.u.values.iter().all(|v| *v == 0.0));
        assert_eq!(state.objective, 0.0);
        assert!(prob
            .sensitivity(&rho, &state)
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn uniaxial_tension_patch() {
        // Roller supports: u_x = 0 on the left edge, u_y = 0 at the bottom-left
        // corner; uniform traction t on the right edge. Exact solution is the
        // homogeneous plane state with sigma_xx = t, sigma_yy = 0.
        let (nx, ny) = (4, 3);
        let mesh = Mesh::rectangle(1.0, 1.0, nx, ny)
            .unwrap()
            .tag_boundary(&BoundarySpec::new(vec![
                Segment::new(Side::Left, 0.0, 1.0, BoundaryTag::Gamma0),
                Segment::new(Side::Right, 0.0, 1.0, BoundaryTag::Gamma1),
            ]))
            .unwrap();
        let space = Arc::new(P1Space::new(mesh));
        let left = space.mesh().nodes_tagged(BoundaryTag::Gamma0);
        let mut dofs: Vec<usize> = left.iter().map(|n| 2 * n).collect();
        dofs.push(1);
        let t = 0.3;
        let prob = ElasticProblem::new(
            Arc::clone(&space),
            KappaParams::unit(),
            lame(),
            [0.0, 0.0],
            [t, 0.0],
        )
        .unwrap()
        .with_constrained_dofs(dofs)
        .unwrap();
        let rho = vec![1.0; space.node_count()];
        let state = prob.solve_state(&rho).unwrap();
        let l = lame();
        for eps in space.element_strains(&state.u.values).unwrap() {
            let s = l.stress(&eps);
            assert!((s[0] - t).abs() < 1e-9, "sigma_xx = {}", s[0]);
            assert!(s[1].abs() < 1e-9 && s[2].abs() < 1e-9);
        }
    }

    #[test]
    fn translation_does_not_change_energy_density() {
        let space = Arc::new(P1Space::new(Mesh::rectangle(1.0, 1.0, 3, 3).unwrap()));
        let l = lame();
        let u: Vec<f64> = space
            .mesh()
            .nodes()
            .iter()
            .flat_map(|p| [0.1 * p[0] * p[1], -0.2 * p[0]])
            .collect();
        let shifted: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(k, v)| v + if k % 2 == 0 { 3.0 } else { -1.5 })
            .collect();
        let e1 = space.element_strains(&u).unwrap();
        let e2 = space.element_strains(&shifted).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            let (wa, wb) = (l.energy_density(a), l.energy_density(b));
            assert!((wa - wb).abs() < 1e-13);
            assert!(wa >= 0.0);
        }
    }
}
