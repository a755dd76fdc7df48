//! Discrete 2-Wasserstein distances between weighted point clouds.
//!
//! [`w2_exact`] solves the Kantorovich linear program with a transportation
//! network simplex; [`w2_entropic`] runs log-domain Sinkhorn iterations with
//! epsilon scaling and removes the entropic bias by symmetrization.

mod entropic;
mod exact;

pub use entropic::{w2_entropic, SinkhornOptions};
pub use exact::{optimal_transport, w2_exact, TransportPlan, EXACT_SUPPORT_LIMIT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::P1Space;

/// Probability measure supported on finitely many points of the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Normalizes `weights` to unit total. Weights must be non-negative with
    /// positive sum.
    pub fn new(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(crate::error::invalid(
                "weights",
                "must be finite and non-negative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroMass);
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { points, weights })
    }

    pub fn dirac(point: [f64; 2]) -> Self {
        Self {
            points: vec![point],
            weights: vec![1.0],
        }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> [f64; 2] {
        self.points
            .iter()
            .zip(&self.weights)
            .fold([0.0, 0.0], |acc, (p, w)| {
                [acc[0] + w * p[0], acc[1] + w * p[1]]
            })
    }

    /// Drops atoms with zero weight.
    pub fn pruned(&self) -> Self {
        let (points, weights) = self
            .points
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(p, w)| (*p, *w))
            .unzip();
        Self { points, weights }
    }

    /// Aggregates atoms into a `cells_x x cells_y` grid over the bounding box
    /// `[0, lx] x [0, ly]`. Each non-empty cell becomes one atom at the
    /// barycenter of its mass.
    pub fn coarsen(&self, lx: f64, ly: f64, cells_x: usize, cells_y: usize) -> Result<Self> {
        if cells_x == 0 || cells_y == 0 {
            return Err(crate::error::invalid("cells", "must be at least 1"));
        }
        let cells = cells_x * cells_y;
        let mut mass = vec![0.0; cells];
        let mut moment = vec![[0.0; 2]; cells];
        for (p, &w) in self.points.iter().zip(&self.weights) {
            let cx = ((p[0] / lx * cells_x as f64).floor().max(0.0) as usize).min(cells_x - 1);
            let cy = ((p[1] / ly * cells_y as f64).floor().max(0.0) as usize).min(cells_y - 1);
            let c = cy * cells_x + cx;
            mass[c] += w;
            moment[c][0] += w * p[0];
            moment[c][1] += w * p[1];
        }
        let (points, weights) = mass
            .iter()
            .zip(&moment)
            .filter(|(m, _)| **m > 0.0)
            .map(|(m, q)| ([q[0] / m, q[1] / m], *m))
            .unzip();
        Self::new(points, weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMethod {
    Exact,
    Entropic,
}

/// Nodal density converted to a probability measure.
#[derive(Debug, Clone)]
pub struct NodalMeasure {
    pub measure: DiscreteMeasure,
    /// Lumped mass before normalization, after negative parts were dropped.
    pub clamped_total: f64,
    /// Total of the negative lumped masses that were dropped.
    pub dropped_negative: f64,
}

/// Support on the mesh nodes with weights `m_i rho_i` (lumped masses),
/// negative entries set to zero, normalized to unit total.
pub fn nodal_measure(space: &P1Space, rho: &[f64]) -> Result<NodalMeasure> {
    if rho.len() != space.node_count() {
        return Err(Error::DimensionMismatch {
            expected: space.node_count(),
            found: rho.len(),
        });
    }
    let mut dropped_negative = 0.0;
    let weights: Vec<f64> = rho
        .iter()
        .zip(space.lumped_areas())
        .map(|(r, m)| {
            let w = r * m;
            if w < 0.0 {
                dropped_negative += w;
                0.0
            } else {
                w
            }
        })
        .collect();
    let clamped_total: f64 = weights.iter().sum();
    if !(clamped_total > 0.0) {
        return Err(Error::ZeroMass);
    }
    let measure = DiscreteMeasure::new(space.mesh().nodes().to_vec(), weights)?;
    Ok(NodalMeasure {
        measure,
        clamped_total,
        dropped_negative,
    })
}

pub(crate) fn squared_distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    dx * dx + dy * dy
}

/// Largest pairwise extent of the union of both supports (bounding-box
/// diagonal).
pub(crate) fn joint_diameter(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in mu.points().iter().chain(nu.points()) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}
