mod common;

use common::*;
use topt_core::{HeatProblem, KappaParams, StateProblem};

/// Symmetric degree-4 rule on the reference triangle: (barycentric a, b, weight).
const RULE: [(f64, f64, f64); 2] = [
    (0.445_948_490_915_965, 0.108_103_018_168_070, 0.223_381_589_678_011),
    (0.091_576_213_509_771, 0.816_847_572_980_459, 0.109_951_743_655_322),
];

fn exact(x: f64) -> f64 {
    x - 0.5 * x * x
}

/// `(||u_h - u||_L2, J_h)` for the unit-conductivity strip on an `n x n` mesh.
fn strip(n: usize) -> (f64, f64) {
    let space = heat_space(n, 0.0, 1.0);
    let prob = HeatProblem::new(space.clone(), KappaParams::unit(), 1.0, 0.0).unwrap();
    let state = prob.solve_state(&vec![1.0; space.node_count()]).unwrap();
    let u = &state.u.values;
    let mesh = space.mesh();
    let mut err2 = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|i| mesh.nodes()[i]);
        let area = mesh.signed_area(t).abs();
        for &(a, b, w) in &RULE {
            for lam in [[a, a, b], [a, b, a], [b, a, a]] {
                let x: f64 = (0..3).map(|k| lam[k] * p[k][0]).sum();
                let uh: f64 = (0..3).map(|k| lam[k] * u[tri[k]]).sum();
                err2 += w * area * (uh - exact(x)).powi(2);
            }
        }
    }
    (err2.sqrt(), state.objective)
}

#[test]
fn strip_converges_at_second_order() {
    let errors: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| strip(n).0).collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} from {errors:?}");
    }
}

#[test]
fn strip_objective_approaches_one_sixth() {
    let (_, j) = strip(64);
    assert!((j - 1.0 / 6.0).abs() < 1e-3, "J = {j}");
}

#[test]
fn no_load_gives_zero_state() {
    let space = heat_space(8, 0.375, 0.625);
    let prob = HeatProblem::new(space.clone(), KappaParams::heat_default(), 0.0, 0.0).unwrap();
    let rho = vec![1.0; space.node_count()];
    let state = prob.solve_state(&rho).unwrap();
    assert!(state.u.values.iter().all(|v| *v == 0.0));
    assert_eq!(state.objective, 0.0);
    assert!(prob.sensitivity(&rho, &state).unwrap().iter().all(|v| *v == 0.0));
}
