//! Compressed sparse row storage and a preconditioned conjugate gradient
//! solver for the symmetric positive definite stiffness systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square CSR matrix with sorted column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a zero-valued matrix from per-row column lists.
    pub fn from_pattern(rows: &[Vec<usize>]) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for cols in rows {
            let mut cols = cols.clone();
            cols.sort_unstable();
            cols.dedup();
            debug_assert!(cols.iter().all(|&c| c < n));
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Dense-to-CSR conversion dropping exact zeros; used by tests.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let pattern: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| (0..r.len()).filter(|&j| r[j] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(&pattern);
        for (i, r) in rows.iter().enumerate() {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.values[k] = r[m.col_idx[k]];
            }
        }
        m
    }

    pub fn n(&self) -> usize {
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn zero_values(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Storage slot of entry `(i, j)`, if it is in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `max |a_ij - a_ji|` over the pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    Jacobi,
    IncompleteCholesky,
    /// Galerkin V-cycle; falls back to incomplete Cholesky when no grid
    /// hierarchy is available.
    Multigrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop once `|r| <= rtol |b|`.
    pub rtol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            max_iter: 20_000,
            preconditioner: Preconditioner::Multigrid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Zero fill-in incomplete Cholesky factor `L` (lower triangle, diagonal last in each row).
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl IncompleteCholesky {
    /// Factors `A + shift * diag(A)`. Fails on a non-positive pivot.
    pub fn factor(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.n();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(a.nnz() / 2 + n);
        let mut values = Vec::with_capacity(a.nnz() / 2 + n);
        row_ptr.push(0);
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j < i {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            col_idx.push(i);
            values.push(a.get(i, i) * (1.0 + shift));
            row_ptr.push(col_idx.len());
        }
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            for p in start..end - 1 {
                let k = col_idx[p];
                // sum_{j < k} L[i,j] L[k,j] over the shared pattern
                let mut s = 0.0;
                let (mut pi, mut pk) = (start, row_ptr[k]);
                let kend = row_ptr[k + 1] - 1;
                while pi < p && pk < kend {
                    match col_idx[pi].cmp(&col_idx[pk]) {
                        std::cmp::Ordering::Less => pi += 1,
                        std::cmp::Ordering::Greater => pk += 1,
                        std::cmp::Ordering::Equal => {
                            s += values[pi] * values[pk];
                            pi += 1;
                            pk += 1;
                        }
                    }
                }
                values[p] = (values[p] - s) / values[kend];
            }
            let d = end - 1;
            let s: f64 = values[start..d].iter().map(|v| v * v).sum();
            let pivot = values[d] - s;
            if !(pivot > 0.0) {
                return None;
            }
            values[d] = pivot.sqrt();
        }
        Some(Self {
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Solves `L L^T z = r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let (start, d) = (self.row_ptr[i], self.row_ptr[i + 1] - 1);
            let mut acc = r[i];
            for p in start..d {
                acc -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = acc / self.values[d];
        }
        for i in (0..n).rev() {
            let (start, d) = (self.row_ptr[i], self.row_ptr[i + 1] - 1);
            z[i] /= self.values[d];
            let zi = z[i];
            for p in start..d {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

enum Precond {
    Jacobi(Vec<f64>),
    Ic(IncompleteCholesky),
}

impl Precond {
    fn build(a: &CsrMatrix, kind: Preconditioner) -> Self {
        if kind == Preconditioner::IncompleteCholesky {
            // Diagonal shifts restore positivity for non-M-matrices.
            for shift in [0.0, 1e-3, 1e-2, 1e-1] {
                if let Some(ic) = IncompleteCholesky::factor(a, shift) {
                    return Precond::Ic(ic);
                }
                log::debug!("IC(0) breakdown with shift {shift}");
            }
        }
        Precond::Jacobi(
            a.diagonal()
                .iter()
                .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        )
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Precond::Ic(ic) => ic.apply(r, z),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for SPD `a`, starting from `x`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: &SolverOptions) -> Result<SolveStats> {
    pcg_with_hierarchy(a, b, x, opts, None)
}

/// As [`pcg`], using `hierarchy` when the multigrid preconditioner is requested.
pub fn pcg_with_hierarchy(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
    hierarchy: Option<&GridHierarchy>,
) -> Result<SolveStats> {
    let n = a.n();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    if dot(b, b) == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    match (opts.preconditioner, hierarchy) {
        (Preconditioner::Multigrid, Some(h)) if h.n_fine() == n && h.depth() > 0 => {
            let mg = Multigrid::new(a, h);
            pcg_core(a, b, x, opts, |r, z| mg.apply(a, r, z))
        }
        (kind, _) => {
            let precond = Precond::build(a, kind);
            pcg_core(a, b, x, opts, |r, z| precond.apply(r, z))
        }
    }
}

fn pcg_core(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
    precond: impl Fn(&[f64], &mut [f64]),
) -> Result<SolveStats> {
    let n = a.n();
    let bnorm = dot(b, b).sqrt();
    let mut r = a.mul_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while rel > opts.rtol {
        if it >= opts.max_iter {
            return Err(Error::Solver {
                iterations: it,
                residual: rel,
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        it += 1;
    }
    Ok(SolveStats {
        iterations: it,
        relative_residual: rel,
    })
}

/// Rectangular interpolation from a coarse to a fine vector, stored by fine row.
#[derive(Debug, Clone)]
pub struct Prolongation {
    n_coarse: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Prolongation {
    pub fn new(n_coarse: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(rows.iter().flatten().all(|(c, _)| *c < n_coarse));
        Self { n_coarse, rows }
    }

    pub fn n_fine(&self) -> usize {
        self.rows.len()
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    /// `fine += P coarse`.
    pub fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]) {
        for (f, row) in fine.iter_mut().zip(&self.rows) {
            for &(c, w) in row {
                *f += w * coarse[c];
            }
        }
    }

    /// `P^T fine`.
    pub fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_coarse];
        for (f, row) in fine.iter().zip(&self.rows) {
            for &(c, w) in row {
                out[c] += w * f;
            }
        }
        out
    }
}

/// Nested prolongations plus the sparsity of every Galerkin coarse operator.
#[derive(Debug, Clone)]
pub struct GridHierarchy {
    prolongations: Vec<Prolongation>,
    patterns: Vec<CsrMatrix>,
}

impl GridHierarchy {
    /// `prolongations[k]` maps level `k + 1` to level `k`; level 0 has the
    /// pattern `fine`.
    pub fn new(fine: &CsrMatrix, prolongations: Vec<Prolongation>) -> Self {
        let mut patterns = Vec::with_capacity(prolongations.len());
        let mut current = fine.clone();
        for p in &prolongations {
            assert_eq!(p.n_fine(), current.n());
            let mut rows: Vec<Vec<usize>> = vec![Vec::new(); p.n_coarse()];
            for i in 0..current.n() {
                for (j, _) in current.row(i) {
                    for &(c1, _) in &p.rows[i] {
                        rows[c1].extend(p.rows[j].iter().map(|&(c2, _)| c2));
                    }
                }
            }
            current = CsrMatrix::from_pattern(&rows);
            patterns.push(current.clone());
        }
        Self {
            prolongations,
            patterns,
        }
    }

    pub fn n_fine(&self) -> usize {
        self.prolongations.first().map_or(0, |p| p.n_fine())
    }

    pub fn depth(&self) -> usize {
        self.prolongations.len()
    }
}

/// Symmetric V-cycle: forward Gauss-Seidel before and backward after the
/// coarse correction, dense Cholesky on the coarsest level.
struct Multigrid<'h> {
    hierarchy: &'h GridHierarchy,
    coarse_ops: Vec<CsrMatrix>,
    coarsest: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl<'h> Multigrid<'h> {
    fn new(a: &CsrMatrix, hierarchy: &'h GridHierarchy) -> Self {
        let mut coarse_ops: Vec<CsrMatrix> = Vec::with_capacity(hierarchy.depth());
        for (k, p) in hierarchy.prolongations.iter().enumerate() {
            let fine = if k == 0 { a } else { &coarse_ops[k - 1] };
            let mut ac = hierarchy.patterns[k].clone();
            for i in 0..fine.n() {
                for (j, v) in fine.row(i) {
                    for &(c1, w1) in &p.rows[i] {
                        for &(c2, w2) in &p.rows[j] {
                            let s = ac.slot(c1, c2).expect("galerkin pattern");
                            ac.values_mut()[s] += w1 * v * w2;
                        }
                    }
                }
            }
            coarse_ops.push(ac);
        }
        let last = coarse_ops.last().expect("non-empty hierarchy");
        let m = last.n();
        let dense = nalgebra::DMatrix::from_fn(m, m, |i, j| last.get(i, j));
        let coarsest = nalgebra::Cholesky::new(dense).unwrap_or_else(|| {
            // Only reachable for indefinite input; regularize the coarse solve.
            let shifted = nalgebra::DMatrix::from_fn(m, m, |i, j| {
                let v = last.get(i, j);
                if i == j {
                    v.abs() + 1e-12
                } else {
                    0.0
                }
            });
            nalgebra::Cholesky::new(shifted).expect("diagonal fallback")
        });
        Self {
            hierarchy,
            coarse_ops,
            coarsest,
        }
    }

    fn apply(&self, a: &CsrMatrix, r: &[f64], z: &mut [f64]) {
        self.cycle(0, a, r, z);
    }

    fn op(&self, level: usize) -> &CsrMatrix {
        &self.coarse_ops[level - 1]
    }

    fn cycle(&self, level: usize, a: &CsrMatrix, r: &[f64], z: &mut [f64]) {
        if level == self.hierarchy.depth() {
            let sol = self
                .coarsest
                .solve(&nalgebra::DVector::from_column_slice(r));
            z.copy_from_slice(sol.as_slice());
            return;
        }
        z.iter_mut().for_each(|v| *v = 0.0);
        gauss_seidel(a, r, z, false);
        let mut res = a.mul_vec(z);
        for (ri, bi) in res.iter_mut().zip(r) {
            *ri = bi - *ri;
        }
        let p = &self.hierarchy.prolongations[level];
        let rc = p.restrict(&res);
        let mut zc = vec![0.0; rc.len()];
        self.cycle(level + 1, self.op(level + 1), &rc, &mut zc);
        p.prolong_add(&zc, z);
        gauss_seidel(a, r, z, true);
    }
}

fn gauss_seidel(a: &CsrMatrix, b: &[f64], x: &mut [f64], backward: bool) {
    let sweep = |i: usize, x: &mut [f64]| {
        let mut acc = b[i];
        let mut diag = 0.0;
        for (j, v) in a.row(i) {
            if j == i {
                diag = v;
            } else {
                acc -= v * x[j];
            }
        }
        x[i] = acc / diag;
    };
    if backward {
        for i in (0..a.n()).rev() {
            sweep(i, x);
        }
    } else {
        for i in 0..a.n() {
            sweep(i, x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = 2.0;
                if i > 0 {
                    r[i - 1] = -1.0;
                }
                if i + 1 < n {
                    r[i + 1] = -1.0;
                }
                r
            })
            .collect();
        CsrMatrix::from_dense(&rows)
    }

    #[test]
    fn ic0_is_exact_for_tridiagonal() {
        // No fill-in for a tridiagonal matrix, so IC(0) is the Cholesky factor.
        let a = laplace_1d(20);
        let ic = IncompleteCholesky::factor(&a, 0.0).unwrap();
        let b: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut z = vec![0.0; 20];
        ic.apply(&b, &mut z);
        let back = a.mul_vec(&z);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn pcg_solves_with_both_preconditioners() {
        let a = laplace_1d(50);
        let exact: Vec<f64> = (0..50).map(|i| (0.1 * i as f64).cos()).collect();
        let b = a.mul_vec(&exact);
        for pre in [Preconditioner::Jacobi, Preconditioner::IncompleteCholesky] {
            let mut x = vec![0.0; 50];
            let opts = SolverOptions {
                preconditioner: pre,
                ..Default::default()
            };
            let stats = pcg(&a, &b, &mut x, &opts).unwrap();
            assert!(stats.relative_residual <= 1e-12);
            for (u, v) in x.iter().zip(&exact) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pcg_reports_non_convergence() {
        let a = laplace_1d(100);
        let b = vec![1.0; 100];
        let mut x = vec![0.0; 100];
        let opts = SolverOptions {
            max_iter: 2,
            preconditioner: Preconditioner::Jacobi,
            ..Default::default()
        };
        assert!(matches!(
            pcg(&a, &b, &mut x, &opts),
            Err(Error::Solver { iterations: 2, .. })
        ));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_1d(5);
        let mut x = vec![1.0; 5];
        let s = pcg(&a, &[0.0; 5], &mut x, &SolverOptions::default()).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(x, vec![0.0; 5]);
    }

    fn linear_prolongation(n_coarse: usize) -> Prolongation {
        // interior points of nested uniform 1D grids: fine 2k+1 is coarse k
        let n_fine = 2 * n_coarse + 1;
        let rows = (0..n_fine)
            .map(|i| {
                if i % 2 == 1 {
                    vec![(i / 2, 1.0)]
                } else {
                    let mut r = Vec::new();
                    if i > 0 {
                        r.push((i / 2 - 1, 0.5));
                    }
                    if i / 2 < n_coarse {
                        r.push((i / 2, 0.5));
                    }
                    r
                }
            })
            .collect();
        Prolongation::new(n_coarse, rows)
    }

    #[test]
    fn multigrid_converges_in_few_iterations() {
        let n = 127;
        let a = laplace_1d(n);
        let h = GridHierarchy::new(
            &a,
            vec![linear_prolongation(63), linear_prolongation(31), linear_prolongation(15)],
        );
        assert_eq!(h.depth(), 3);
        let exact: Vec<f64> = (0..n).map(|i| (0.05 * i as f64).sin()).collect();
        let b = a.mul_vec(&exact);
        let mut x = vec![0.0; n];
        let stats = pcg_with_hierarchy(&a, &b, &mut x, &SolverOptions::default(), Some(&h)).unwrap();
        assert!(stats.iterations <= 12, "{} iterations", stats.iterations);
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-8);
        }
        // Galerkin coarse operator of the 1D Laplacian is half the coarse Laplacian.
        let mg = Multigrid::new(&a, &h);
        assert!((mg.coarse_ops[0].get(5, 5) - 1.0).abs() < 1e-14);
        assert!((mg.coarse_ops[0].get(5, 6) + 0.5).abs() < 1e-14);
    }
}
