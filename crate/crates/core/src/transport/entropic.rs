//! Log-domain Sinkhorn with epsilon scaling.

use super::{joint_diameter, squared_distance, DiscreteMeasure};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Final regularization relative to `diam^2`.
    pub reg: f64,
    /// Initial regularization relative to `diam^2`.
    pub initial_reg: f64,
    /// Number of geometric stages from `initial_reg` down to `reg`.
    pub stages: usize,
    /// Iteration cap per stage.
    pub max_iter: usize,
    /// Target L1 marginal violation in the last stage.
    pub tol: f64,
    /// Over-relaxation factor in `[1, 2)` applied to the potential updates.
    pub overrelaxation: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            reg: 1e-3,
            initial_reg: 0.1,
            stages: 10,
            max_iter: 100_000,
            tol: 1e-9,
            overrelaxation: 1.0,
        }
    }
}

/// Iterations between marginal checks.
const CHECK_EVERY: usize = 8;

/// Marginal violation above which the result is rejected.
const ACCEPTABLE_VIOLATION: f64 = 1e-6;

/// Debiased entropic estimate of `W2(mu, nu)`.
///
/// For each pair among `(mu, nu)`, `(mu, mu)`, `(nu, nu)` the transport cost
/// `<pi, C>` of the entropic plan is computed and combined as
/// `T(mu, nu) - T(mu, mu) / 2 - T(nu, nu) / 2`, which vanishes identically
/// when `mu = nu`.
pub fn w2_entropic(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SinkhornOptions,
) -> Result<f64> {
    if !(opts.reg > 0.0 && opts.reg.is_finite()) {
        return Err(invalid(
            "reg",
            format!("must be positive, got {}", opts.reg),
        ));
    }
    if !(opts.initial_reg >= opts.reg) {
        return Err(invalid("initial_reg", "must be at least reg"));
    }
    if !(1.0..2.0).contains(&opts.overrelaxation) {
        return Err(invalid("overrelaxation", "must lie in [1, 2)"));
    }
    if opts.stages == 0 || opts.max_iter == 0 {
        return Err(invalid("stages", "stages and max_iter must be positive"));
    }
    let mu = mu.pruned();
    let nu = nu.pruned();
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::ZeroMass);
    }
    let diam = joint_diameter(&mu, &nu);
    if diam == 0.0 {
        return Ok(0.0);
    }
    let scale = diam * diam;
    let cross = entropic_cost(&mu, &nu, scale, opts)?;
    let self_mu = entropic_cost(&mu, &mu, scale, opts)?;
    let self_nu = entropic_cost(&nu, &nu, scale, opts)?;
    let debiased = cross - 0.5 * (self_mu + self_nu);
    Ok(debiased.max(0.0).sqrt())
}

/// Transport cost of the entropic plan at the final regularization.
fn entropic_cost(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    scale: f64,
    opts: &SinkhornOptions,
) -> Result<f64> {
    let (x, y) = (mu.points(), nu.points());
    let log_a: Vec<f64> = mu.weights().iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = nu.weights().iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; x.len()];
    let mut g = vec![0.0; y.len()];

    let ratio = if opts.stages > 1 {
        (opts.reg / opts.initial_reg).powf(1.0 / (opts.stages - 1) as f64)
    } else {
        1.0
    };
    let mut violation = f64::INFINITY;
    for stage in 0..opts.stages {
        let eps = if stage + 1 == opts.stages {
            opts.reg * scale
        } else {
            opts.initial_reg * ratio.powi(stage as i32) * scale
        };
        let tol = if stage + 1 == opts.stages {
            opts.tol
        } else {
            opts.tol.max(1e-6)
        };
        let omega = opts.overrelaxation;
        for it in 1..=opts.max_iter {
            c_transform(&mut f, &g, x, y, &log_b, eps, omega);
            c_transform(&mut g, &f, y, x, &log_a, eps, omega);
            if it % CHECK_EVERY != 0 && it != opts.max_iter {
                continue;
            }
            // After the g update the column marginals are exact; measure rows.
            violation = row_violation(&f, &g, x, y, mu.weights(), &log_a, &log_b, eps);
            if violation <= tol {
                break;
            }
        }
    }
    if violation > ACCEPTABLE_VIOLATION {
        return Err(Error::SinkhornNotConverged { violation });
    }
    let eps = opts.reg * scale;
    let mut cost = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            let c = squared_distance(xi, yj);
            cost += ((f[i] + g[j] - c) / eps + log_a[i] + log_b[j]).exp() * c;
        }
    }
    Ok(cost)
}

/// `f_i <- (1 - omega) f_i + omega * T_i`, with the soft c-transform
/// `T_i = -eps * log sum_j exp((g_j - c_ij) / eps + log b_j)`.
fn c_transform(
    f: &mut [f64],
    g: &[f64],
    x: &[[f64; 2]],
    y: &[[f64; 2]],
    log_b: &[f64],
    eps: f64,
    omega: f64,
) {
    let mut terms = vec![0.0; y.len()];
    for (fi, &xi) in f.iter_mut().zip(x) {
        let mut top = f64::NEG_INFINITY;
        for ((t, &yj), (gj, lb)) in terms.iter_mut().zip(y).zip(g.iter().zip(log_b)) {
            *t = (gj - squared_distance(xi, yj)) / eps + lb;
            top = top.max(*t);
        }
        let sum: f64 = terms.iter().map(|t| (t - top).exp()).sum();
        let t = -eps * (top + sum.ln());
        *fi = if omega == 1.0 { t } else { (1.0 - omega) * *fi + omega * t };
    }
}

#[allow(clippy::too_many_arguments)]
fn row_violation(
    f: &[f64],
    g: &[f64],
    x: &[[f64; 2]],
    y: &[[f64; 2]],
    a: &[f64],
    log_a: &[f64],
    log_b: &[f64],
    eps: f64,
) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let row: f64 = y
                .iter()
                .enumerate()
                .map(|(j, &yj)| {
                    ((f[i] + g[j] - squared_distance(xi, yj)) / eps + log_a[i] + log_b[j]).exp()
                })
                .sum();
            (row - a[i]).abs()
        })
        .sum()
}
