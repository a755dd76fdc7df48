//! P1 finite-element assembly on a [`Mesh`].
//!
//! Coefficients are piecewise constant (one value per triangle), so every
//! element integral below is exact. Vector fields interleave components:
//! degree of freedom `2 * node + c` holds component `c` of `node`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linsys::CsrMatrix;
use crate::mesh::{BoundaryTag, Mesh};

/// Nodal values of a scalar (`components == 1`) or 2-vector
/// (`components == 2`) finite-element function.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
    pub components: usize,
}

impl NodalField {
    pub fn scalar(values: Vec<f64>) -> Self {
        Self {
            values,
            components: 1,
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            values,
            components: 2,
        }
    }

    pub fn zeros(nodes: usize, components: usize) -> Self {
        Self {
            values: vec![0.0; nodes * components],
            components,
        }
    }
}

/// Lamé constants of the isotropic law `sigma = 2 l1 eps + l2 tr(eps) I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LameParameters {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl LameParameters {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 > 0.0 && lambda1.is_finite()) {
            return Err(invalid(
                "lambda1",
                format!("must be positive, got {lambda1}"),
            ));
        }
        if !(lambda2 > 0.0 && lambda2.is_finite()) {
            return Err(invalid(
                "lambda2",
                format!("must be positive, got {lambda2}"),
            ));
        }
        Ok(Self { lambda1, lambda2 })
    }

    /// `eps : sigma(eps)` for a symmetric strain.
    pub fn energy_density(&self, eps: &Strain) -> f64 {
        let [xx, yy, xy] = eps.0;
        let trace = xx + yy;
        2.0 * self.lambda1 * (xx * xx + yy * yy + 2.0 * xy * xy) + self.lambda2 * trace * trace
    }

    /// Stress tensor components `[xx, yy, xy]`.
    pub fn stress(&self, eps: &Strain) -> [f64; 3] {
        let [xx, yy, xy] = eps.0;
        let trace = xx + yy;
        [
            2.0 * self.lambda1 * xx + self.lambda2 * trace,
            2.0 * self.lambda1 * yy + self.lambda2 * trace,
            2.0 * self.lambda1 * xy,
        ]
    }
}

/// Symmetric strain `[eps_xx, eps_yy, eps_xy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strain(pub [f64; 3]);

/// Area and constant basis-function gradients of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeometry {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl TriangleGeometry {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let twice_area =
            (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grads = [[0.0; 2]; 3];
        for k in 0..3 {
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            grads[k] = [(a[1] - b[1]) / twice_area, (b[0] - a[0]) / twice_area];
        }
        Self {
            area: 0.5 * twice_area,
            grads,
        }
    }
}

struct VectorLayout {
    pattern: CsrMatrix,
    slots: Vec<[usize; 36]>,
}

/// Mesh plus precomputed geometry and sparsity patterns for fast repeated
/// assembly with changing coefficients.
pub struct P1Space {
    mesh: Mesh,
    geometry: Vec<TriangleGeometry>,
    lumped: Vec<f64>,
    scalar_pattern: CsrMatrix,
    scalar_slots: Vec<[usize; 9]>,
    vector: OnceLock<VectorLayout>,
    mass: CsrMatrix,
    unit_stiffness: CsrMatrix,
}

impl P1Space {
    pub fn new(mesh: Mesh) -> Self {
        let geometry: Vec<TriangleGeometry> = mesh
            .triangles()
            .iter()
            .map(|tri| TriangleGeometry::new(tri.map(|n| mesh.nodes()[n])))
            .collect();

        let n = mesh.node_count();
        let mut rows = vec![Vec::new(); n];
        for tri in mesh.triangles() {
            for &a in tri {
                rows[a].extend_from_slice(tri);
            }
        }
        let scalar_pattern = CsrMatrix::from_pattern(rows);
        let scalar_slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut slots = [0; 9];
                for (a, &i) in tri.iter().enumerate() {
                    for (b, &j) in tri.iter().enumerate() {
                        slots[3 * a + b] = scalar_pattern.slot(i, j).expect("pattern entry");
                    }
                }
                slots
            })
            .collect();

        let mut lumped = vec![0.0; n];
        for (tri, geo) in mesh.triangles().iter().zip(&geometry) {
            for &i in tri {
                lumped[i] += geo.area / 3.0;
            }
        }

        let mut space = Self {
            mesh,
            geometry,
            lumped,
            scalar_pattern,
            scalar_slots,
            vector: OnceLock::new(),
            mass: CsrMatrix::zeros(0),
            unit_stiffness: CsrMatrix::zeros(0),
        };
        space.mass = space.assemble_mass();
        space.unit_stiffness = space
            .stiffness(&vec![1.0; space.mesh.triangle_count()])
            .expect("unit coefficient is valid");
        space
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn geometry(&self) -> &[TriangleGeometry] {
        &self.geometry
    }

    pub fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    pub fn triangle_count(&self) -> usize {
        self.mesh.triangle_count()
    }

    /// Row sums of the consistent mass matrix.
    pub fn lumped_areas(&self) -> &[f64] {
        &self.lumped
    }

    /// Cached consistent mass matrix.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Cached stiffness matrix with unit coefficient.
    pub fn unit_stiffness(&self) -> &CsrMatrix {
        &self.unit_stiffness
    }

    /// `integral of u` for a nodal scalar field, i.e. `1^T M u`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.lumped.iter().zip(u).map(|(m, v)| m * v).sum()
    }

    /// Consistent P1 mass matrix.
    pub fn assemble_mass(&self) -> CsrMatrix {
        let mut m = self.scalar_pattern.clone();
        let values = m.values_mut();
        for (slots, geo) in self.scalar_slots.iter().zip(&self.geometry) {
            for a in 0..3 {
                for b in 0..3 {
                    let w = if a == b { 2.0 } else { 1.0 };
                    values[slots[3 * a + b]] += geo.area * w / 12.0;
                }
            }
        }
        m
    }

    /// `K[i][j] = sum_T coeff(T) * integral_T grad(phi_i) . grad(phi_j)`.
    pub fn stiffness(&self, coeff: &[f64]) -> Result<CsrMatrix> {
        self.check_coefficient(coeff)?;
        let mut k = self.scalar_pattern.clone();
        let values = k.values_mut();
        for ((slots, geo), &c) in self.scalar_slots.iter().zip(&self.geometry).zip(coeff) {
            for a in 0..3 {
                for b in 0..3 {
                    let ga = geo.grads[a];
                    let gb = geo.grads[b];
                    values[slots[3 * a + b]] += c * geo.area * (ga[0] * gb[0] + ga[1] * gb[1]);
                }
            }
        }
        Ok(k)
    }

    /// `K(weight) s` computed element by element, for a signed per-element
    /// `weight` (no sign restriction, unlike [`P1Space::stiffness`]).
    pub fn weighted_laplacian_apply(&self, weight: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        if weight.len() != self.triangle_count() {
            return Err(Error::DimensionMismatch {
                expected: self.triangle_count(),
                found: weight.len(),
            });
        }
        self.check_nodal(s, 1)?;
        let mut out = vec![0.0; self.node_count()];
        for ((tri, geo), &w) in self.mesh.triangles().iter().zip(&self.geometry).zip(weight) {
            let mut grad = [0.0; 2];
            for k in 0..3 {
                grad[0] += s[tri[k]] * geo.grads[k][0];
                grad[1] += s[tri[k]] * geo.grads[k][1];
            }
            let scale = w * geo.area;
            for k in 0..3 {
                out[tri[k]] += scale * (geo.grads[k][0] * grad[0] + geo.grads[k][1] * grad[1]);
            }
        }
        Ok(out)
    }

    /// `2n x 2n` matrix `sum_T coeff(T) * integral_T eps(phi_i) : sigma(phi_j)`.
    pub fn elastic_stiffness(&self, coeff: &[f64], lame: LameParameters) -> Result<CsrMatrix> {
        self.check_coefficient(coeff)?;
        let layout = self.vector_layout();
        let mut k = layout.pattern.clone();
        let values = k.values_mut();
        let d = [
            [2.0 * lame.lambda1 + lame.lambda2, lame.lambda2, 0.0],
            [lame.lambda2, 2.0 * lame.lambda1 + lame.lambda2, 0.0],
            [0.0, 0.0, lame.lambda1],
        ];
        for ((slots, geo), &c) in layout.slots.iter().zip(&self.geometry).zip(coeff) {
            // Voigt strain-displacement rows: (xx, yy, engineering shear).
            let mut bmat = [[0.0; 6]; 3];
            for k in 0..3 {
                let [gx, gy] = geo.grads[k];
                bmat[0][2 * k] = gx;
                bmat[1][2 * k + 1] = gy;
                bmat[2][2 * k] = gy;
                bmat[2][2 * k + 1] = gx;
            }
            let mut db = [[0.0; 6]; 3];
            for r in 0..3 {
                for col in 0..6 {
                    db[r][col] = (0..3).map(|s| d[r][s] * bmat[s][col]).sum();
                }
            }
            let scale = c * geo.area;
            for a in 0..6 {
                for b in 0..6 {
                    let v: f64 = (0..3).map(|r| bmat[r][a] * db[r][b]).sum();
                    values[slots[6 * a + b]] += scale * v;
                }
            }
        }
        Ok(k)
    }

    fn check_coefficient(&self, coeff: &[f64]) -> Result<()> {
        if coeff.len() != self.triangle_count() {
            return Err(Error::DimensionMismatch {
                expected: self.triangle_count(),
                found: coeff.len(),
            });
        }
        if let Some((element, &value)) = coeff
            .iter()
            .enumerate()
            .find(|(_, c)| !(**c >= 0.0 && c.is_finite()))
        {
            return Err(Error::NegativeCoefficient { element, value });
        }
        Ok(())
    }

    fn vector_layout(&self) -> &VectorLayout {
        self.vector.get_or_init(|| {
            let n = self.node_count();
            let mut rows = vec![Vec::new(); 2 * n];
            for tri in self.mesh.triangles() {
                let dofs = dofs_of(tri);
                for &a in &dofs {
                    rows[a].extend_from_slice(&dofs);
                }
            }
            let pattern = CsrMatrix::from_pattern(rows);
            let slots = self
                .mesh
                .triangles()
                .iter()
                .map(|tri| {
                    let dofs = dofs_of(tri);
                    let mut slots = [0; 36];
                    for (a, &i) in dofs.iter().enumerate() {
                        for (b, &j) in dofs.iter().enumerate() {
                            slots[6 * a + b] = pattern.slot(i, j).expect("pattern entry");
                        }
                    }
                    slots
                })
                .collect();
            VectorLayout { pattern, slots }
        })
    }

    /// `F_i = integral_D f phi_i + integral_{Gamma1} g phi_i` for constant
    /// scalar `f`, `g`.
    pub fn scalar_load(&self, f: f64, g: f64) -> Vec<f64> {
        let mut load = vec![0.0; self.node_count()];
        if f != 0.0 {
            for (tri, geo) in self.mesh.triangles().iter().zip(&self.geometry) {
                for &i in tri {
                    load[i] += f * geo.area / 3.0;
                }
            }
        }
        if g != 0.0 {
            for (i, w) in self.boundary_weights(BoundaryTag::Gamma1) {
                load[i] += g * w;
            }
        }
        load
    }

    /// Vector analogue of [`P1Space::scalar_load`] with interleaved dofs.
    pub fn vector_load(&self, f: [f64; 2], g: [f64; 2]) -> Vec<f64> {
        let mut load = vec![0.0; 2 * self.node_count()];
        if f != [0.0, 0.0] {
            for (tri, geo) in self.mesh.triangles().iter().zip(&self.geometry) {
                for &i in tri {
                    load[2 * i] += f[0] * geo.area / 3.0;
                    load[2 * i + 1] += f[1] * geo.area / 3.0;
                }
            }
        }
        if g != [0.0, 0.0] {
            for (i, w) in self.boundary_weights(BoundaryTag::Gamma1) {
                load[2 * i] += g[0] * w;
                load[2 * i + 1] += g[1] * w;
            }
        }
        load
    }

    /// `(node, integral of phi_node over the edge)` for every endpoint of
    /// every edge carrying `tag`. Each linear trace integrates to half the
    /// edge length.
    fn boundary_weights(&self, tag: BoundaryTag) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mesh.edges_tagged(tag).flat_map(move |e| {
            let [p, q] = e.nodes.map(|n| self.mesh.nodes()[n]);
            let half = 0.5 * (q[0] - p[0]).hypot(q[1] - p[1]);
            [(e.nodes[0], half), (e.nodes[1], half)]
        })
    }

    /// Mean of the three vertex values on each triangle.
    pub fn element_average(&self, nodal: &[f64]) -> Result<Vec<f64>> {
        self.check_nodal(nodal, 1)?;
        Ok(self
            .mesh
            .triangles()
            .iter()
            .map(|tri| (nodal[tri[0]] + nodal[tri[1]] + nodal[tri[2]]) / 3.0)
            .collect())
    }

    /// Constant gradient of a scalar P1 field on every triangle.
    pub fn element_gradients(&self, u: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check_nodal(u, 1)?;
        Ok(self
            .mesh
            .triangles()
            .iter()
            .zip(&self.geometry)
            .map(|(tri, geo)| {
                let mut g = [0.0; 2];
                for k in 0..3 {
                    g[0] += u[tri[k]] * geo.grads[k][0];
                    g[1] += u[tri[k]] * geo.grads[k][1];
                }
                g
            })
            .collect())
    }

    /// Constant symmetric strain of an interleaved 2-vector P1 field on every
    /// triangle.
    pub fn element_strains(&self, u: &[f64]) -> Result<Vec<Strain>> {
        self.check_nodal(u, 2)?;
        Ok(self
            .mesh
            .triangles()
            .iter()
            .zip(&self.geometry)
            .map(|(tri, geo)| {
                let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
                for k in 0..3 {
                    let [gx, gy] = geo.grads[k];
                    let (ux, uy) = (u[2 * tri[k]], u[2 * tri[k] + 1]);
                    xx += ux * gx;
                    yy += uy * gy;
                    xy += 0.5 * (ux * gy + uy * gx);
                }
                Strain([xx, yy, xy])
            })
            .collect())
    }

    /// Lumped L2 projection of a per-triangle scalar onto the nodes:
    /// each node receives the area-weighted mean over its incident triangles.
    pub fn project_to_nodes(&self, element: &[f64]) -> Result<Vec<f64>> {
        if element.len() != self.triangle_count() {
            return Err(Error::DimensionMismatch {
                expected: self.triangle_count(),
                found: element.len(),
            });
        }
        let mut acc = vec![0.0; self.node_count()];
        for ((tri, geo), &e) in self
            .mesh
            .triangles()
            .iter()
            .zip(&self.geometry)
            .zip(element)
        {
            for &i in tri {
                acc[i] += geo.area / 3.0 * e;
            }
        }
        for (a, m) in acc.iter_mut().zip(&self.lumped) {
            *a /= m;
        }
        Ok(acc)
    }

    fn check_nodal(&self, u: &[f64], components: usize) -> Result<()> {
        let expected = components * self.node_count();
        if u.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: u.len(),
            });
        }
        Ok(())
    }
}

fn dofs_of(tri: &[usize; 3]) -> [usize; 6] {
    [
        2 * tri[0],
        2 * tri[0] + 1,
        2 * tri[1],
        2 * tri[1] + 1,
        2 * tri[2],
        2 * tri[2] + 1,
    ]
}

/// Symmetric elimination of homogeneous Dirichlet constraints: rows and
/// columns of `fixed` are zeroed, their diagonal set to one and their
/// right-hand side entries to zero.
pub fn apply_dirichlet(a: &CsrMatrix, b: &[f64], fixed: &[usize]) -> Result<(CsrMatrix, Vec<f64>)> {
    if fixed.is_empty() {
        return Err(Error::EmptyDirichlet);
    }
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut is_fixed = vec![false; n];
    for &d in fixed {
        if d >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d + 1,
            });
        }
        is_fixed[d] = true;
    }

    let mut out = a.clone();
    let row_ptr = out.row_ptr().to_vec();
    let col_idx = out.col_idx().to_vec();
    let values = out.values_mut();
    for i in 0..n {
        for k in row_ptr[i]..row_ptr[i + 1] {
            let j = col_idx[k];
            if is_fixed[i] || is_fixed[j] {
                values[k] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    // A fixed dof whose diagonal was not stored (cannot happen for assembled
    // operators, but keep the contract for arbitrary inputs).
    let missing: Vec<usize> = (0..n)
        .filter(|&i| is_fixed[i] && out.slot(i, i).is_none())
        .collect();
    if !missing.is_empty() {
        let extra =
            CsrMatrix::from_triplets(n, &missing.iter().map(|&i| (i, i, 1.0)).collect::<Vec<_>>())?;
        out = out.linear_combination(1.0, &extra, 1.0)?;
    }

    let rhs = b
        .iter()
        .zip(&is_fixed)
        .map(|(&v, &f)| if f { 0.0 } else { v })
        .collect();
    Ok((out, rhs))
}
