//! Transportation simplex for the discrete Kantorovich problem.
//!
//! The basis is a spanning tree on the bipartite graph of `m` source and `n`
//! target nodes (`m + n - 1` basic cells). Each pivot prices cells in blocks,
//! walks the tree path closing the cycle of the entering cell, and performs
//! the ratio test along it.

use std::collections::VecDeque;

use super::{squared_distance, DiscreteMeasure};
use crate::error::{Error, Result};

/// Largest support size accepted by [`w2_exact`].
pub const EXACT_SUPPORT_LIMIT: usize = 512;

/// Optimal coupling in sparse form, with a dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `(source, target, mass)` for every positive entry.
    pub entries: Vec<(usize, usize, f64)>,
    /// Source potentials `u` with `u_i + v_j <= c_ij`.
    pub source_potential: Vec<f64>,
    /// Target potentials `v`.
    pub target_potential: Vec<f64>,
}

impl TransportPlan {
    pub fn source_marginal(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for &(i, _, w) in &self.entries {
            out[i] += w;
        }
        out
    }

    pub fn target_marginal(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for &(_, j, w) in &self.entries {
            out[j] += w;
        }
        out
    }
}

/// Exact `W2(mu, nu)` and an optimal plan.
pub fn w2_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, TransportPlan)> {
    let (cost, plan) = optimal_transport(mu, nu, squared_distance)?;
    Ok((cost.max(0.0).sqrt(), plan))
}

/// Minimal total cost `sum pi_ij c(x_i, y_j)` over couplings, for any
/// ground cost.
pub fn optimal_transport<C>(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    ground_cost: C,
) -> Result<(f64, TransportPlan)>
where
    C: Fn([f64; 2], [f64; 2]) -> f64,
{
    for size in [mu.len(), nu.len()] {
        if size > EXACT_SUPPORT_LIMIT {
            return Err(Error::SupportTooLarge {
                size,
                limit: EXACT_SUPPORT_LIMIT,
            });
        }
        if size == 0 {
            return Err(Error::ZeroMass);
        }
    }
    let n = nu.len();
    let cost: Vec<f64> = mu
        .points()
        .iter()
        .flat_map(|&p| nu.points().iter().map(move |&q| (p, q)))
        .map(|(p, q)| ground_cost(p, q))
        .collect();
    let mut simplex = Simplex::north_west(mu.weights(), nu.weights(), cost);
    simplex.optimize();

    let total: f64 = simplex
        .cells
        .iter()
        .map(|c| c.flow * simplex.cost[c.i * n + c.j])
        .sum();
    let entries = simplex
        .cells
        .iter()
        .filter(|c| c.flow > 0.0)
        .map(|c| (c.i, c.j, c.flow))
        .collect();
    let (u, v) = simplex.potentials();
    Ok((
        total,
        TransportPlan {
            entries,
            source_potential: u,
            target_potential: v,
        },
    ))
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    flow: f64,
}

struct Simplex {
    m: usize,
    n: usize,
    cost: Vec<f64>,
    cells: Vec<Cell>,
    /// Tree adjacency: node -> (neighbour node, cell index). Sources are
    /// nodes `0..m`, targets `m..m + n`.
    adjacency: Vec<Vec<(usize, usize)>>,
    cost_scale: f64,
}

impl Simplex {
    fn north_west(a: &[f64], b: &[f64], cost: Vec<f64>) -> Self {
        let (m, n) = (a.len(), b.len());
        let mut ra = a.to_vec();
        let mut rb = b.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            if i == m - 1 {
                for (jj, &rest) in rb.iter().enumerate().skip(j) {
                    cells.push(Cell {
                        i,
                        j: jj,
                        flow: rest.max(0.0),
                    });
                }
                break;
            }
            if j == n - 1 {
                for (ii, &rest) in ra.iter().enumerate().skip(i) {
                    cells.push(Cell {
                        i: ii,
                        j,
                        flow: rest.max(0.0),
                    });
                }
                break;
            }
            if ra[i] <= rb[j] {
                cells.push(Cell { i, j, flow: ra[i] });
                rb[j] -= ra[i];
                i += 1;
            } else {
                cells.push(Cell { i, j, flow: rb[j] });
                ra[i] -= rb[j];
                j += 1;
            }
        }
        debug_assert_eq!(cells.len(), m + n - 1);

        let mut adjacency = vec![Vec::new(); m + n];
        for (k, c) in cells.iter().enumerate() {
            adjacency[c.i].push((m + c.j, k));
            adjacency[m + c.j].push((c.i, k));
        }
        let cost_scale = cost
            .iter()
            .copied()
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        Self {
            m,
            n,
            cost,
            cells,
            adjacency,
            cost_scale,
        }
    }

    /// Dual potentials with `u_0 = 0` from `u_i + v_j = c_ij` on the tree.
    fn potentials(&self) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0]);
        while let Some(node) = queue.pop_front() {
            for &(next, k) in &self.adjacency[node] {
                if pot[next].is_nan() {
                    let c = self.cells[k];
                    pot[next] = self.cost[c.i * n + c.j] - pot[node];
                    queue.push_back(next);
                }
            }
        }
        let v = pot.split_off(m);
        (pot, v)
    }

    fn optimize(&mut self) {
        let (m, n) = (self.m, self.n);
        let total = m * n;
        let block = ((total as f64).sqrt().ceil() as usize).max(16).min(total);
        let tolerance = 1e-12 * self.cost_scale;
        let mut start = 0;
        let max_pivots = 50 * total + 1000;

        for _ in 0..max_pivots {
            let (u, v) = self.potentials();
            // Block pricing: best candidate inside the first block that
            // contains a violating cell, scanning cyclically.
            let mut entering: Option<(usize, f64)> = None;
            let mut scanned = 0;
            while scanned < total {
                let end = (scanned + block).min(total);
                for offset in scanned..end {
                    let cell = (start + offset) % total;
                    let (i, j) = (cell / n, cell % n);
                    let reduced = self.cost[cell] - u[i] - v[j];
                    if reduced < -tolerance && entering.is_none_or(|(_, best)| reduced < best) {
                        entering = Some((cell, reduced));
                    }
                }
                scanned = end;
                if entering.is_some() {
                    break;
                }
            }
            let Some((cell, _)) = entering else {
                return;
            };
            start = (start + scanned) % total;
            self.pivot(cell / n, cell % n);
        }
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let m = self.m;
        // Tree path from target node m+q to source node p.
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.adjacency.len()];
        let mut visited = vec![false; self.adjacency.len()];
        let target = m + q;
        visited[target] = true;
        let mut queue = VecDeque::from([target]);
        while let Some(node) = queue.pop_front() {
            if node == p {
                break;
            }
            for &(next, k) in &self.adjacency[node] {
                if !visited[next] {
                    visited[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        // Walk back from p to the target; edge order from the target side.
        let mut path = Vec::new();
        let mut node = p;
        while node != target {
            let (prev, k) = parent[node].expect("basis tree is connected");
            path.push(k);
            node = prev;
        }
        path.reverse();

        // Odd positions (0, 2, ...) from the target side lose flow.
        let mut theta = f64::INFINITY;
        let mut leaving = path[0];
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 && self.cells[k].flow < theta {
                theta = self.cells[k].flow;
                leaving = k;
            }
        }
        let theta = theta.max(0.0);
        for (pos, &k) in path.iter().enumerate() {
            let flow = &mut self.cells[k].flow;
            if pos % 2 == 0 {
                *flow = (*flow - theta).max(0.0);
            } else {
                *flow += theta;
            }
        }

        let old = self.cells[leaving];
        self.adjacency[old.i].retain(|&(_, k)| k != leaving);
        self.adjacency[m + old.j].retain(|&(_, k)| k != leaving);
        self.cells[leaving] = Cell {
            i: p,
            j: q,
            flow: theta,
        };
        self.adjacency[p].push((m + q, leaving));
        self.adjacency[m + q].push((p, leaving));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_measures_have_zero_distance() {
        let mu = DiscreteMeasure::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let (d, plan) = w2_exact(&mu, &mu).unwrap();
        assert!(d.abs() < 1e-12);
        for &(i, j, w) in &plan.entries {
            assert_eq!(i, j, "mass {w} moved off the diagonal");
        }
    }

    #[test]
    fn two_diracs() {
        let d = w2_exact(
            &DiscreteMeasure::dirac([0.1, 0.2]),
            &DiscreteMeasure::dirac([0.4, 0.6]),
        )
        .unwrap()
        .0;
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn line_instance() {
        let mu = DiscreteMeasure::new(vec![[0.0, 0.0], [1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![[0.25, 0.0], [0.75, 0.0]], vec![0.5, 0.5]).unwrap();
        let (d, _) = w2_exact(&mu, &nu).unwrap();
        assert!((d - 0.25).abs() < 1e-14);
    }

    #[test]
    fn oversize_rejected() {
        let pts: Vec<[f64; 2]> = (0..513).map(|i| [i as f64, 0.0]).collect();
        let big = DiscreteMeasure::new(pts, vec![1.0; 513]).unwrap();
        assert!(matches!(
            w2_exact(&big, &DiscreteMeasure::dirac([0.0, 0.0])),
            Err(Error::SupportTooLarge { size: 513, .. })
        ));
    }
}
