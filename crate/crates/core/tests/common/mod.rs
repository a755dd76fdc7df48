//! Independent dense re-implementations used as test oracles. Geometry is
//! recomputed from vertex coordinates by inverting the affine map, not taken
//! from the library.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3};
use topt_core::{BoundarySpec, BoundaryTag, KappaParams, Mesh, P1Space, Segment, Side};

pub struct DenseTri {
    pub nodes: [usize; 3],
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

pub fn dense_geometry(mesh: &Mesh) -> Vec<DenseTri> {
    mesh.triangles()
        .iter()
        .map(|t| {
            let p = t.map(|i| mesh.nodes()[i]);
            let v = Matrix3::new(
                1.0, p[0][0], p[0][1], //
                1.0, p[1][0], p[1][1], //
                1.0, p[2][0], p[2][1],
            );
            let c = v.try_inverse().expect("non-degenerate triangle");
            DenseTri {
                nodes: *t,
                area: 0.5 * v.determinant().abs(),
                grads: [0, 1, 2].map(|k| [c[(1, k)], c[(2, k)]]),
            }
        })
        .collect()
}

pub fn dense_mass(mesh: &Mesh) -> DMatrix<f64> {
    let n = mesh.node_count();
    let mut m = DMatrix::zeros(n, n);
    for t in dense_geometry(mesh) {
        for a in 0..3 {
            for b in 0..3 {
                let w = if a == b { 2.0 } else { 1.0 };
                m[(t.nodes[a], t.nodes[b])] += t.area * w / 12.0;
            }
        }
    }
    m
}

pub fn lumped(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        m.nrows(),
        m.row_iter().map(|r| r.sum()),
    ))
}

pub fn dense_stiffness(mesh: &Mesh, coeff: &[f64]) -> DMatrix<f64> {
    let n = mesh.node_count();
    let mut k = DMatrix::zeros(n, n);
    for (t, c) in dense_geometry(mesh).iter().zip(coeff) {
        for a in 0..3 {
            for b in 0..3 {
                let (ga, gb) = (t.grads[a], t.grads[b]);
                k[(t.nodes[a], t.nodes[b])] += c * t.area * (ga[0] * gb[0] + ga[1] * gb[1]);
            }
        }
    }
    k
}

/// Strain-displacement matrix (engineering shear) and plane constitutive
/// matrix.
pub fn dense_elastic_stiffness(mesh: &Mesh, coeff: &[f64], l1: f64, l2: f64) -> DMatrix<f64> {
    let n = 2 * mesh.node_count();
    let d = nalgebra::Matrix3::new(
        2.0 * l1 + l2,
        l2,
        0.0,
        l2,
        2.0 * l1 + l2,
        0.0,
        0.0,
        0.0,
        l1,
    );
    let mut k = DMatrix::zeros(n, n);
    for (t, c) in dense_geometry(mesh).iter().zip(coeff) {
        let mut b = nalgebra::SMatrix::<f64, 3, 6>::zeros();
        for a in 0..3 {
            let g = t.grads[a];
            b[(0, 2 * a)] = g[0];
            b[(1, 2 * a + 1)] = g[1];
            b[(2, 2 * a)] = g[1];
            b[(2, 2 * a + 1)] = g[0];
        }
        let ke = b.transpose() * d * b * (t.area * c);
        for a in 0..6 {
            for bb in 0..6 {
                let ga = 2 * t.nodes[a / 2] + a % 2;
                let gb = 2 * t.nodes[bb / 2] + bb % 2;
                k[(ga, gb)] += ke[(a, bb)];
            }
        }
    }
    k
}

pub fn element_average(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|t| t.iter().map(|&i| nodal[i]).sum::<f64>() / 3.0)
        .collect()
}

/// Solves `A x = b` restricted to the free dofs, `x = 0` on `fixed`.
pub fn solve_constrained(a: &DMatrix<f64>, b: &DVector<f64>, fixed: &[usize]) -> DVector<f64> {
    let free: Vec<usize> = (0..a.nrows()).filter(|i| !fixed.contains(i)).collect();
    let af = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
    let bf = DVector::from_iterator(free.len(), free.iter().map(|&i| b[i]));
    let xf = af.lu().solve(&bf).expect("nonsingular reduced system");
    let mut x = DVector::zeros(a.nrows());
    for (k, &i) in free.iter().enumerate() {
        x[i] = xf[k];
    }
    x
}

pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().lu().solve(b).expect("nonsingular system")
}

/// `kappa` and `kappa'` of the decaying law written out directly.
pub fn kappa_decaying(a: f64, p: f64, s: f64) -> (f64, f64) {
    let q = 1.0 - (-a * s).exp();
    (q.powf(-p), -p * a * (-a * s).exp() * q.powf(-p - 1.0))
}

/// Unit square with Gamma0 on the left edge between `lo` and `hi`.
pub fn heat_space(n: usize, lo: f64, hi: f64) -> Arc<P1Space> {
    let mesh = Mesh::rectangle(1.0, 1.0, n, n)
        .unwrap()
        .tag_boundary(&BoundarySpec::new(vec![Segment::new(
            Side::Left,
            lo,
            hi,
            BoundaryTag::Gamma0,
        )]))
        .unwrap();
    Arc::new(P1Space::new(mesh))
}

/// `[0,2] x [0,1]`, clamped left edge, Gamma1 on the right edge between
/// `lo` and `hi`.
pub fn cantilever_space(nx: usize, ny: usize, lo: f64, hi: f64) -> Arc<P1Space> {
    let mesh = Mesh::rectangle(2.0, 1.0, nx, ny)
        .unwrap()
        .tag_boundary(&BoundarySpec::new(vec![
            Segment::new(Side::Left, 0.0, 1.0, BoundaryTag::Gamma0),
            Segment::new(Side::Right, lo, hi, BoundaryTag::Gamma1),
        ]))
        .unwrap();
    Arc::new(P1Space::new(mesh))
}

pub fn heat_kappa() -> KappaParams {
    KappaParams::heat_default()
}

pub fn to_dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
