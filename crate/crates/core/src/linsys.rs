//! Compressed sparse row storage and symmetric positive definite solvers.
//!
//! Solves go through Jacobi-preconditioned conjugate gradients. When CG runs
//! out of iterations or stagnates (typically on strongly heterogeneous
//! coefficients) the system is refactored with an envelope Cholesky
//! decomposition, which is the dense Cholesky factor restricted to the
//! matrix profile and therefore exact up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets, summing
    /// duplicates. Column indices end up sorted within each row.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: i.max(j) + 1,
                });
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Matrix with a fixed sparsity pattern and all values zero. `rows[i]`
    /// lists the columns of row `i`; they are sorted and deduplicated here.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Position of entry `(i, j)` in the value array, if it is stored.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
        Ok(())
    }

    /// `alpha * self + beta * other`. Patterns are merged.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        if self.row_ptr == other.row_ptr && self.col_idx == other.col_idx {
            let values = self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect();
            return Ok(Self {
                values,
                ..self.clone()
            });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, alpha * v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, beta * v)));
        }
        Self::from_triplets(self.n, &triplets)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| alpha * v).collect(),
            ..self.clone()
        }
    }

    /// `|x . (A y) - y . (A x)|`, zero for a symmetric matrix up to rounding.
    pub fn symmetry_defect(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.matvec(y)?;
        let ax = self.matvec(x)?;
        Ok((dot(x, &ay) - dot(y, &ax)).abs())
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        dense
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Cg,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `|b - Ax| / |b|`.
    pub relative_residual: f64,
    /// Componentwise backward error `max_i |b - Ax|_i / (|A||x| + |b|)_i`,
    /// computed for direct solves only (zero otherwise).
    #[serde(default)]
    pub backward_error: f64,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `|Ax - b| / |b|`.
    pub tol: f64,
    /// CG iteration cap; `None` means `20 n`.
    pub max_iter: Option<usize>,
    /// Allow the envelope Cholesky fallback when CG fails.
    pub direct_fallback: bool,
    /// Factor directly, skipping CG, when the estimated factorization cost
    /// (flops over the reordered envelope) is at most this. Zero disables.
    pub direct_first_flops: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            direct_fallback: true,
            direct_first_flops: 0.0,
        }
    }
}

impl SolverOptions {
    /// Direct factorization for anything up to ~1e9 flops, CG beyond.
    /// Suited to the high-contrast systems of density-dependent problems,
    /// where Jacobi-CG stagnates.
    pub const fn robust() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            direct_fallback: true,
            direct_first_flops: 1e9,
        }
    }

    pub const fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Envelope storage above which the direct fallback is not attempted.
const ENVELOPE_LIMIT: usize = 60_000_000;

pub fn solve_spd(
    a: &CsrMatrix,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    solve_spd_from(a, b, None, opts)
}

/// Like [`solve_spd`] with an optional initial guess for CG.
pub fn solve_spd_from(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                backward_error: 0.0,
                method: SolveMethod::Cg,
            },
        ));
    }
    let max_iter = opts.max_iter.unwrap_or(20 * n.max(1));
    if opts.direct_fallback && opts.direct_first_flops > 0.0 {
        let order = Ordering::for_matrix(a);
        if order.flops <= opts.direct_first_flops && order.envelope <= ENVELOPE_LIMIT {
            return direct_solve(a, b, order, 0, opts);
        }
    }
    match conjugate_gradient(a, b, guess, opts.tol, max_iter)? {
        CgOutcome::Converged(x, report) => Ok((x, report)),
        CgOutcome::Failed(best, report) => {
            if !opts.direct_fallback {
                return Err(Error::NotConverged { report, best });
            }
            let order = Ordering::for_matrix(a);
            if order.envelope > ENVELOPE_LIMIT {
                return Err(Error::NotConverged { report, best });
            }
            direct_solve(a, b, order, report.iterations, opts)
        }
    }
}

/// Envelope Cholesky with up to three steps of iterative refinement.
fn direct_solve(
    a: &CsrMatrix,
    b: &[f64],
    order: Ordering,
    cg_iterations: usize,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let b_norm = norm(b);
    let factor = EnvelopeCholesky::factor_ordered(a, order.perm)?;
    let mut x = factor.solve(b);
    let mut residual = residual_norm(a, &x, b) / b_norm;
    // Iterative refinement recovers digits lost to ill conditioning.
    for _ in 0..3 {
        if residual <= opts.tol {
            break;
        }
        let ax = a.matvec(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let d = factor.solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + di).collect();
        let next = residual_norm(a, &candidate, b) / b_norm;
        if !(next < residual) {
            break;
        }
        x = candidate;
        residual = next;
    }
    // At extreme coefficient contrast `|b - Ax|` is dominated by rounding in
    // `Ax` itself; a backward-stable solution is then recognized by its
    // componentwise backward error.
    let backward_error = componentwise_backward_error(a, &x, b);
    let report = SolveReport {
        iterations: cg_iterations,
        relative_residual: residual,
        backward_error,
        method: SolveMethod::Direct,
    };
    if residual <= opts.tol || backward_error <= DIRECT_BACKWARD_TOL {
        Ok((x, report))
    } else {
        Err(Error::NotConverged { report, best: x })
    }
}

/// Accepted componentwise backward error of the direct fallback.
const DIRECT_BACKWARD_TOL: f64 = 1e-10;

fn componentwise_backward_error(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    (0..a.dim())
        .map(|i| {
            let (mut ax, mut scale) = (0.0, b[i].abs());
            for (j, v) in a.row(i) {
                ax += v * x[j];
                scale += (v * x[j]).abs();
            }
            let r = (b[i] - ax).abs();
            if scale > 0.0 {
                r / scale
            } else if r == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn residual_norm(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x).expect("dimensions checked by caller");
    ax.iter()
        .zip(b)
        .map(|(p, q)| (q - p) * (q - p))
        .sum::<f64>()
        .sqrt()
}

enum CgOutcome {
    Converged(Vec<f64>, SolveReport),
    Failed(Vec<f64>, SolveReport),
}

fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.dim();
    let b_norm = norm(b);
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(row, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NotPositiveDefinite { row, pivot: d })
            }
        })
        .collect::<Result<_>>()?;

    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.len(),
            })
        }
        None => vec![0.0; n],
    };
    let mut r = b.to_vec();
    if guess.is_some() {
        let ax = a.matvec(&x)?;
        for (ri, ai) in r.iter_mut().zip(&ax) {
            *ri -= ai;
        }
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    let mut best = x.clone();
    let mut best_res = norm(&r) / b_norm;
    let mut reference = best_res;
    let mut last_progress = 0;
    let window = n.clamp(50, 1000);

    let report = |iterations, relative_residual| SolveReport {
        iterations,
        relative_residual,
        backward_error: 0.0,
        method: SolveMethod::Cg,
    };

    if best_res <= tol {
        return Ok(CgOutcome::Converged(x, report(0, best_res)));
    }

    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Ok(CgOutcome::Failed(best, report(it, best_res)));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm(&r) / b_norm;
        if res < best_res {
            best_res = res;
            best.copy_from_slice(&x);
        }
        if res <= tol {
            // Guard against drift of the recursive residual.
            let true_res = residual_norm(a, &x, b) / b_norm;
            if true_res <= tol {
                return Ok(CgOutcome::Converged(x, report(it, true_res)));
            }
            r = b.to_vec();
            let ax = a.matvec(&x)?;
            for (ri, ai) in r.iter_mut().zip(&ax) {
                *ri -= ai;
            }
        }
        if best_res < 0.5 * reference {
            reference = best_res;
            last_progress = it;
        } else if it - last_progress > window {
            return Ok(CgOutcome::Failed(best, report(it, best_res)));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(CgOutcome::Failed(best, report(max_iter, best_res)))
}

/// Symmetric permutation chosen for the envelope factorization.
struct Ordering {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    envelope: usize,
    flops: f64,
}

impl Ordering {
    /// The better (smaller factorization cost) of the natural and the
    /// reverse Cuthill-McKee orderings.
    fn for_matrix(a: &CsrMatrix) -> Self {
        let natural: Vec<usize> = (0..a.dim()).collect();
        let rcm = reverse_cuthill_mckee(a);
        let (e0, f0) = envelope_cost(a, &natural);
        let (e1, f1) = envelope_cost(a, &rcm);
        if f1 < f0 {
            Self {
                perm: rcm,
                envelope: e1,
                flops: f1,
            }
        } else {
            Self {
                perm: natural,
                envelope: e0,
                flops: f0,
            }
        }
    }
}

/// Envelope entries and approximate factorization flops under `perm`.
fn envelope_cost(a: &CsrMatrix, perm: &[usize]) -> (usize, f64) {
    let n = a.dim();
    let mut inverse = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let mut entries = 0;
    let mut flops = 0.0;
    for (new, &old) in perm.iter().enumerate() {
        let first = a.row(old).map(|(j, _)| inverse[j]).min().unwrap_or(new).min(new);
        let width = new - first + 1;
        entries += width;
        flops += (width * width) as f64;
    }
    (entries, flops)
}

/// Reverse Cuthill-McKee ordering of the adjacency graph of `a`, started in
/// each component from a pseudo-peripheral node.
fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let neighbours = |i: usize| a.row(i).map(|(j, _)| j).filter(move |&j| j != i);
    let degree: Vec<usize> = (0..n).map(|i| neighbours(i).count()).collect();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let mut level = vec![usize::MAX; n];

    // Breadth-first levels from `root`; returns (eccentricity, last level).
    let bfs = |root: usize, level: &mut [usize]| -> (usize, Vec<usize>) {
        let mut visited = vec![root];
        level[root] = 0;
        let mut head = 0;
        while head < visited.len() {
            let v = visited[head];
            head += 1;
            for w in neighbours(v) {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    visited.push(w);
                }
            }
        }
        let depth = visited.iter().map(|&v| level[v]).max().unwrap_or(0);
        let last = visited.iter().copied().filter(|&v| level[v] == depth).collect();
        for &v in &visited {
            level[v] = usize::MAX;
        }
        (depth, last)
    };

    for seed in 0..n {
        if placed[seed] {
            continue;
        }
        let mut root = seed;
        let (mut depth, mut last) = bfs(root, &mut level);
        loop {
            let candidate = *last
                .iter()
                .min_by_key(|&&v| degree[v])
                .expect("level sets are non-empty");
            let (d, l) = bfs(candidate, &mut level);
            if d > depth {
                root = candidate;
                depth = d;
                last = l;
            } else {
                break;
            }
        }

        let start = order.len();
        order.push(root);
        placed[root] = true;
        let mut head = start;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = neighbours(v).filter(|&w| !placed[w]).collect();
            next.sort_by_key(|&w| degree[w]);
            for w in next {
                if !placed[w] {
                    placed[w] = true;
                    order.push(w);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `L` stored row-wise over the lower envelope of `A`:
/// row `i` holds columns `first[i]..=i`.
pub struct EnvelopeCholesky {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors `A` in its natural ordering.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Self::factor_ordered(a, (0..a.dim()).collect())
    }

    /// Factors `P A P^T` with `perm[new] = old`.
    fn factor_ordered(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(perm[i]).map(|(j, _)| inverse[j]).min().unwrap_or(i).min(i))
            .collect();
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + i - first[i] + 1);
        }
        let mut values = vec![0.0; offset[n]];
        for i in 0..n {
            for (j, v) in a.row(perm[i]) {
                let j = inverse[j];
                if j <= i {
                    values[offset[i] + j - first[i]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let row_i = &values[offset[i] + start - fi..offset[i] + j - fi];
                let row_j = &values[offset[j] + start - fj..offset[j] + j - fj];
                let s = dot(row_i, row_j);
                let idx = offset[i] + j - fi;
                if j < i {
                    let djj = values[offset[j] + j - fj];
                    values[idx] = (values[idx] - s) / djj;
                } else {
                    let pivot = values[idx] - s;
                    if !(pivot > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot });
                    }
                    values[idx] = pivot.sqrt();
                }
            }
        }
        Ok(Self {
            perm,
            first,
            offset,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.first.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let s = dot(&row[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, lk) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= lk * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> CsrMatrix {
        CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let x = [1.5, -2.0, 0.25];
        assert_eq!(CsrMatrix::identity(3).matvec(&x).unwrap(), x.to_vec());
        assert_eq!(CsrMatrix::zeros(3).matvec(&x).unwrap(), vec![0.0; 3]);
        assert_eq!(two_by_two().matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert!(matches!(
            two_by_two().matvec(&x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn triplets_are_summed_and_sorted() {
        let a = CsrMatrix::from_triplets(2, &[(1, 1, 1.0), (0, 1, 2.0), (1, 1, 3.0), (0, 0, 1.0)])
            .unwrap();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 1), 4.0);
        assert_eq!(a.col_idx(), &[0, 1, 1]);
    }

    #[test]
    fn identity_solve_takes_one_iteration() {
        let b = vec![3.0, -1.0, 2.0, 0.5];
        let (x, report) =
            solve_spd(&CsrMatrix::identity(4), &b, &SolverOptions::default()).unwrap();
        assert_eq!(x, b);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.method, SolveMethod::Cg);
    }

    #[test]
    fn two_by_two_solve() {
        let (x, report) = solve_spd(&two_by_two(), &[3.0, 3.0], &SolverOptions::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(report.relative_residual <= 1e-10);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (x, report) = solve_spd(&two_by_two(), &[0.0, 0.0], &SolverOptions::default()).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn envelope_cholesky_matches_cg() {
        // 1D Laplacian plus shift.
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.1));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let direct = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
        let (cg, _) = solve_spd(&a, &b, &SolverOptions::default()).unwrap();
        for (p, q) in direct.iter().zip(&cg) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn fallback_to_direct_when_cg_capped() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 1e-3));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t).unwrap();
        let b = vec![1.0; n];
        let opts = SolverOptions {
            max_iter: Some(3),
            ..SolverOptions::default()
        };
        let (x, report) = solve_spd(&a, &b, &opts).unwrap();
        assert_eq!(report.method, SolveMethod::Direct);
        assert!(residual_norm(&a, &x, &b) / norm(&b) <= 1e-10);

        let strict = SolverOptions {
            max_iter: Some(3),
            direct_fallback: false,
            ..SolverOptions::default()
        };
        match solve_spd(&a, &b, &strict) {
            Err(Error::NotConverged { report, best }) => {
                assert_eq!(best.len(), n);
                assert!(report.relative_residual > 1e-10);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn rcm_shrinks_grid_envelope() {
        // 5-point Laplacian on a 30 x 6 grid numbered along the long side.
        let (nx, ny) = (30, 6);
        let id = |i: usize, j: usize| j * nx + i;
        let mut t = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                t.push((id(i, j), id(i, j), 4.5));
                if i + 1 < nx {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                    t.push((id(i + 1, j), id(i, j), -1.0));
                }
                if j + 1 < ny {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                    t.push((id(i, j + 1), id(i, j), -1.0));
                }
            }
        }
        let a = CsrMatrix::from_triplets(nx * ny, &t).unwrap();
        let natural: Vec<usize> = (0..nx * ny).collect();
        let rcm = reverse_cuthill_mckee(&a);
        let mut sorted = rcm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, natural);
        assert!(envelope_cost(&a, &rcm).0 < envelope_cost(&a, &natural).0 / 2);

        let b: Vec<f64> = (0..nx * ny).map(|i| (0.3 * i as f64).cos()).collect();
        let x = EnvelopeCholesky::factor_ordered(&a, rcm).unwrap().solve(&b);
        assert!(residual_norm(&a, &x, &b) / norm(&b) < 1e-13);
        let robust = solve_spd(&a, &b, &SolverOptions::robust()).unwrap();
        assert_eq!(robust.1.method, SolveMethod::Direct);
        assert_eq!(robust.1.iterations, 0);
    }

    #[test]
    fn indefinite_matrix_rejected_by_direct() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)])
            .unwrap();
        assert!(matches!(
            EnvelopeCholesky::factor(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
