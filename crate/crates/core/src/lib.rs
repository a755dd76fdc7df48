//! Mass optimization by a filtered Wasserstein gradient flow.
//!
//! A nodal density `rho` on a triangulated rectangle is transported along
//! `d rho/dt = div(rho grad S)`, where `S` is the (smoothed, filtered)
//! sensitivity of a potential-energy objective. The discrete update conserves
//! total mass exactly. Heat conduction and plane linear elasticity are the
//! two supported state problems; [`transport`] provides discrete 2-Wasserstein
//! distances for measuring how filtering perturbs the trajectory.

pub mod error;
pub mod fem;
pub mod flow;
pub mod linsys;
pub mod material;
pub mod mesh;
pub mod physics;
pub mod smoothing;
pub mod transport;

pub use error::{Error, Result};
pub use fem::{LameParameters, NodalField, P1Space};
pub use flow::{run_flow, FlowHistory, FlowParams, FlowRecord};
pub use linsys::{CsrMatrix, SolveReport, SolverOptions};
pub use material::{KappaParams, KappaVariant};
pub use mesh::{BoundarySpec, BoundaryTag, Mesh, Segment, Side};
pub use physics::{ElasticProblem, HeatProblem, StateProblem, StateSolution};
pub use smoothing::{DensityField, SmoothingParams};
pub use transport::{DiscreteMeasure, TransportMethod, TransportPlan};
