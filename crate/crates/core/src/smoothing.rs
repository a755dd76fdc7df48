//! Elliptic regularizations used by the flow: one implicit Euler step of the
//! Neumann heat equation, and the density-weighted sensitivity filter.
//!
//! Both keep constants fixed and preserve `1^T M x` exactly, because
//! constant test functions annihilate the stiffness term.
//!
//! The heat step uses the lumped (row-sum) mass matrix `L`. With the
//! non-obtuse meshes of [`crate::mesh`], `L + delta K1` is an M-matrix, so the
//! step obeys the discrete maximum principle for every `delta`, and its
//! transpose with respect to the lumped inner product is itself. The latter
//! makes `heat_smooth(S)` the exact gradient of `rho -> J(heat_smooth(rho))`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fem::P1Space;
use crate::linsys::{solve_spd_from, CsrMatrix, SolveMethod, SolveReport, SolverOptions};

/// Nodal density values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(space: &P1Space, value: f64) -> Self {
        Self::new(vec![value; space.node_count()])
    }

    /// `1^T M rho`.
    pub fn total_mass(&self, space: &P1Space) -> f64 {
        space.integrate(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn negative_count(&self) -> usize {
        self.values.iter().filter(|v| **v < 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    /// Resolvent parameter for densities and sensitivities.
    pub delta: f64,
    /// Resolvent parameter for the filter weight.
    pub epsilon: f64,
    /// Filter strength.
    pub eta: f64,
}

impl SmoothingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("eta", self.eta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

fn identity_report() -> SolveReport {
    SolveReport {
        iterations: 0,
        relative_residual: 0.0,
        backward_error: 0.0,
        method: SolveMethod::Cg,
    }
}

/// Solves `(L + delta K1) x = L field`, the lumped weak form of
/// `x - field = delta * laplace(x)` with homogeneous Neumann data.
pub fn heat_smooth(
    space: &P1Space,
    field: &[f64],
    delta: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(
            "delta",
            format!("must be non-negative, got {delta}"),
        ));
    }
    if delta == 0.0 {
        return Ok((field.to_vec(), identity_report()));
    }
    if field.len() != space.node_count() {
        return Err(crate::Error::DimensionMismatch {
            expected: space.node_count(),
            found: field.len(),
        });
    }
    let lumped = space.lumped_areas();
    let rhs: Vec<f64> = field.iter().zip(lumped).map(|(f, m)| f * m).collect();
    let a = heat_operator(space, delta);
    solve_spd_from(&a, &rhs, Some(field), opts)
}

/// `L + delta K1`.
pub fn heat_operator(space: &P1Space, delta: f64) -> CsrMatrix {
    let mut a = space.unit_stiffness().scaled(delta);
    for (i, m) in space.lumped_areas().iter().enumerate() {
        let k = a.slot(i, i).expect("stiffness pattern holds the diagonal");
        a.values_mut()[k] += m;
    }
    a
}

/// Solves `(M + eta K(rho_bar)) x = M s_delta` with `rho_bar` averaged onto
/// elements as the diffusion weight.
pub fn filter_sensitivity(
    space: &P1Space,
    s_delta: &[f64],
    rho_bar: &[f64],
    eta: f64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid("eta", format!("must be non-negative, got {eta}")));
    }
    if eta == 0.0 {
        return Ok((s_delta.to_vec(), identity_report()));
    }
    let rhs = space.mass().matvec(s_delta)?;
    let weight = space.element_average(rho_bar)?;
    let k = space.stiffness(&weight)?;
    let a = space.mass().linear_combination(1.0, &k, eta)?;
    solve_spd_from(&a, &rhs, Some(s_delta), opts)
}
