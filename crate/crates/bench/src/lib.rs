//! Problem fixtures shared by the benchmarks.

use std::sync::Arc;

use topt_core::{
    BoundarySpec, BoundaryTag, ElasticProblem, HeatProblem, KappaParams, LameParameters, Mesh,
    P1Space, Segment, Side,
};

/// Unit-square heat problem with a centred Dirichlet band on the left edge.
pub fn heat(n: usize) -> HeatProblem {
    let h = 1.0 / n as f64;
    let lo = (0.44 / h).floor() * h;
    let hi = (0.56 / h).ceil() * h;
    let mesh = Mesh::rectangle(1.0, 1.0, n, n)
        .unwrap()
        .tag_boundary(&BoundarySpec::new(vec![Segment::new(
            Side::Left,
            lo,
            hi,
            BoundaryTag::Gamma0,
        )]))
        .unwrap();
    HeatProblem::new(Arc::new(P1Space::new(mesh)), KappaParams::heat_default(), 0.5, 0.0).unwrap()
}

/// `[0,2] x [0,1]` cantilever loaded downward on the right edge.
pub fn cantilever(nx: usize, ny: usize) -> ElasticProblem {
    let h = 1.0 / ny as f64;
    let mesh = Mesh::rectangle(2.0, 1.0, nx, ny)
        .unwrap()
        .tag_boundary(&BoundarySpec::new(vec![
            Segment::new(Side::Left, 0.0, 1.0, BoundaryTag::Gamma0),
            Segment::new(
                Side::Right,
                (0.44 / h).floor() * h,
                (0.56 / h).ceil() * h,
                BoundaryTag::Gamma1,
            ),
        ]))
        .unwrap();
    ElasticProblem::new(
        Arc::new(P1Space::new(mesh)),
        KappaParams::elastic_default(),
        LameParameters::new(15.0 / 26.0, 5.0 / 13.0).unwrap(),
        [0.0, 0.0],
        [0.0, -1.0],
    )
    .unwrap()
}

/// Deterministic smooth density in `[0.5, 1.5]`.
pub fn wavy_density(space: &P1Space) -> Vec<f64> {
    space
        .mesh()
        .nodes()
        .iter()
        .map(|p| 1.0 + 0.5 * (7.0 * p[0]).sin() * (5.0 * p[1]).cos())
        .collect()
}
