//! Compressed-row sparse matrices and the linear solver used by every step.
//!
//! Systems up to `direct_threshold` unknowns are factorized with a sparse LU
//! (faer); larger ones go through ILU(0)-preconditioned BiCGSTAB. Both paths
//! honour the same relative residual contract.

use std::sync::Mutex;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use log::{debug, warn};

use crate::error::{Error, Result};

/// Row-compressed sparsity structure with sorted, unique column indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Union of the dense couplings `rows x cols` of every element.
    pub fn from_elements<'a>(
        nrows: usize,
        ncols: usize,
        elements: impl Iterator<Item = (&'a [usize], &'a [usize])>,
    ) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for (r, c) in elements {
            for &i in r {
                rows[i].extend_from_slice(c);
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: &SparsityPattern) -> Self {
        Self {
            nrows: pattern.nrows,
            ncols: pattern.ncols,
            row_ptr: pattern.row_ptr.clone(),
            col_idx: pattern.col_idx.clone(),
            values: vec![0.0; pattern.nnz()],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), ncols, &t)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].binary_search(&j).ok().map(|k| s + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds to an entry that must exist in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    /// Scatters a dense local matrix (row-major, `rows.len() x cols.len()`).
    pub fn add_local(&mut self, rows: &[usize], cols: &[usize], local: &[f64]) {
        debug_assert_eq!(local.len(), rows.len() * cols.len());
        for (a, &i) in rows.iter().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let row = &self.col_idx[s..e];
            for (b, &j) in cols.iter().enumerate() {
                let v = local[a * cols.len() + b];
                if v != 0.0 {
                    let k = row.binary_search(&j).unwrap_or_else(|_| panic!("entry ({i}, {j}) not in sparsity pattern"));
                    self.values[s + k] += v;
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.values[k] * x[self.col_idx[k]]).sum())
            .collect()
    }

    /// `x^T A y`.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.push((self.col_idx[k], i, self.values[k]));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.scale(alpha);
        m
    }

    /// `alpha * self + beta * other`, over the union of both patterns.
    pub fn lin_comb(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        if self.row_ptr == other.row_ptr && self.col_idx == other.col_idx {
            let mut m = self.clone();
            m.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a = alpha * *a + beta * b);
            return m;
        }
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for (m, s) in [(self, alpha), (other, beta)] {
            for i in 0..m.nrows {
                for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                    t.push((i, m.col_idx[k], s * m.values[k]));
                }
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Assembles a block matrix; `None` blocks are zero.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>]) -> Self {
        let row_sizes: Vec<usize> = blocks
            .iter()
            .map(|r| r.iter().flatten().next().expect("every block row needs a block").nrows)
            .collect();
        let ncb = blocks[0].len();
        let col_sizes: Vec<usize> = (0..ncb)
            .map(|j| blocks.iter().find_map(|r| r[j]).expect("every block column needs a block").ncols)
            .collect();
        let row_off: Vec<usize> = row_sizes.iter().scan(0, |s, &n| Some(std::mem::replace(s, *s + n))).collect();
        let col_off: Vec<usize> = col_sizes.iter().scan(0, |s, &n| Some(std::mem::replace(s, *s + n))).collect();
        let nrows = row_sizes.iter().sum();
        let ncols = col_sizes.iter().sum();
        let mut t = Vec::new();
        for (bi, r) in blocks.iter().enumerate() {
            for (bj, m) in r.iter().enumerate() {
                if let Some(m) = m {
                    assert_eq!((m.nrows, m.ncols), (row_sizes[bi], col_sizes[bj]), "block ({bi}, {bj}) size mismatch");
                    for i in 0..m.nrows {
                        for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                            t.push((row_off[bi] + i, col_off[bj] + m.col_idx[k], m.values[k]));
                        }
                    }
                }
            }
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    /// Replaces row `i` by the identity row.
    pub fn pin_row(&mut self, i: usize) {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            self.values[k] = if self.col_idx[k] == i { 1.0 } else { 0.0 };
        }
        assert!(self.position(i, i).is_some(), "row {i} has no diagonal entry");
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row[self.col_idx[k]] += self.values[k];
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest `|a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let d = self.lin_comb(1.0, &t, -1.0);
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = d.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub max_iter: usize,
    pub direct_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, max_iter: 5000, direct_threshold: 200_000 }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    /// `||Ax - b|| / ||b||` (absolute residual when `b = 0`).
    pub residual: f64,
    pub iterations: usize,
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| ax - bi).collect();
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

/// Symbolic LU analysis of the last sparsity pattern seen, reused while the
/// pattern stays the same. Time stepping solves many systems with one pattern.
#[derive(Default)]
pub struct SymbolicCache {
    slot: Mutex<Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>>,
}

impl std::fmt::Debug for SymbolicCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SymbolicCache")
    }
}

impl SymbolicCache {
    fn get(&self, a: &CsrMatrix) -> Result<SymbolicLu<usize>> {
        let mut slot = self.slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((rp, ci, sym)) = slot.as_ref() {
            if *rp == a.row_ptr && *ci == a.col_idx {
                return Ok(sym.clone());
            }
        }
        let n = a.nrows;
        // the row-compressed arrays of A are the column-compressed arrays of A^T
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
        let sym = SymbolicLu::try_new(pattern)
            .map_err(|e| Error::Solver { reason: format!("symbolic LU failed: {e:?}"), residual: f64::INFINITY })?;
        *slot = Some((a.row_ptr.clone(), a.col_idx.clone(), sym.clone()));
        Ok(sym)
    }
}

pub fn solve(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<Solution> {
    solve_cached(a, b, opts, &SymbolicCache::default())
}

/// [`solve`] reusing the symbolic factorization held in `cache`.
pub fn solve_cached(a: &CsrMatrix, b: &[f64], opts: &SolverOptions, cache: &SymbolicCache) -> Result<Solution> {
    assert_eq!(a.nrows, a.ncols, "solve needs a square matrix");
    assert_eq!(b.len(), a.nrows);
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear system"));
    }
    if norm2(b) == 0.0 {
        return Ok(Solution { x: vec![0.0; b.len()], residual: 0.0, iterations: 0 });
    }
    let sol = if a.nrows <= opts.direct_threshold { solve_direct(a, b, cache)? } else { bicgstab(a, b, opts)? };
    if !(sol.residual <= opts.rtol) {
        return Err(Error::Solver { reason: "residual above tolerance".into(), residual: sol.residual });
    }
    debug!("solve n={} nnz={} residual={:.2e} iterations={}", a.nrows, a.nnz(), sol.residual, sol.iterations);
    Ok(sol)
}

fn solve_direct(a: &CsrMatrix, b: &[f64], cache: &SymbolicCache) -> Result<Solution> {
    let n = a.nrows;
    let symbolic = cache.get(a)?;
    let pattern = SymbolicSparseColMatRef::new_checked(n, n, &a.row_ptr, None, &a.col_idx);
    // factorizes A^T; solves below go through the transpose
    let lu = Lu::try_new_with_symbolic(symbolic, SparseColMatRef::new(pattern, &a.values))
        .map_err(|e| Error::Solver { reason: format!("sparse LU failed: {e:?}"), residual: f64::INFINITY })?;
    let mut x = b.to_vec();
    lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
    let mut residual = relative_residual(a, &x, b);
    // a couple of refinement sweeps recover digits lost to pivoting
    let mut sweeps = 0;
    while residual > 1e-13 && sweeps < 3 && residual.is_finite() {
        let mut r: Vec<f64> = b.iter().zip(a.mul_vec(&x)).map(|(bi, ax)| bi - ax).collect();
        lu.solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut r, n, 1));
        let candidate: Vec<f64> = x.iter().zip(&r).map(|(xi, ri)| xi + ri).collect();
        let res = relative_residual(a, &candidate, b);
        if res >= residual {
            break;
        }
        x = candidate;
        residual = res;
        sweeps += 1;
    }
    if !residual.is_finite() {
        return Err(Error::Solver { reason: "factorization produced non-finite values".into(), residual });
    }
    Ok(Solution { x, residual, iterations: sweeps })
}

/// Incomplete LU factorization with the sparsity of `A`.
struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.nrows;
        let diag: Vec<usize> = (0..n)
            .map(|i| {
                lu.position(i, i).ok_or(Error::Solver { reason: format!("missing diagonal in row {i}"), residual: f64::INFINITY })
            })
            .collect::<Result<_>>()?;
        for i in 0..n {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for kk in s..e {
                let k = lu.col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.values[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Solver { reason: format!("zero ILU pivot at {k}"), residual: f64::INFINITY });
                }
                let factor = lu.values[kk] / pivot;
                lu.values[kk] = factor;
                let (ks, ke) = (diag[k] + 1, lu.row_ptr[k + 1]);
                for jj in ks..ke {
                    let j = lu.col_idx[jj];
                    if let Ok(p) = lu.col_idx[s..e].binary_search(&j) {
                        lu.values[s + p] -= factor * lu.values[jj];
                    }
                }
            }
        }
        Ok(Self { lu, diag })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let mut y = r.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for k in self.lu.row_ptr[i]..self.diag[i] {
                acc -= self.lu.values[k] * y[self.lu.col_idx[k]];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in self.diag[i] + 1..self.lu.row_ptr[i + 1] {
                acc -= self.lu.values[k] * y[self.lu.col_idx[k]];
            }
            y[i] = acc / self.lu.values[self.diag[i]];
        }
        y
    }
}

fn bicgstab(a: &CsrMatrix, b: &[f64], opts: &SolverOptions) -> Result<Solution> {
    let n = b.len();
    let pre = Ilu0::new(a)?;
    let nb = norm2(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for it in 1..=opts.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let y = pre.apply(&p);
        v = a.mul_vec(&y);
        alpha = rho / dot(&r_hat, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        x.iter_mut().zip(&y).for_each(|(xi, yi)| *xi += alpha * yi);
        if norm2(&s) / nb <= opts.rtol {
            let residual = relative_residual(a, &x, b);
            if residual <= opts.rtol {
                return Ok(Solution { x, residual, iterations: it });
            }
        }
        let z = pre.apply(&s);
        let t = a.mul_vec(&z);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += omega * zi);
        r = s.iter().zip(&t).map(|(si, ti)| si - omega * ti).collect();
        if norm2(&r) / nb <= opts.rtol {
            let residual = relative_residual(a, &x, b);
            if residual <= opts.rtol {
                return Ok(Solution { x, residual, iterations: it });
            }
        }
        if omega == 0.0 || !omega.is_finite() {
            break;
        }
    }
    let residual = relative_residual(a, &x, b);
    if residual <= opts.rtol {
        return Ok(Solution { x, residual, iterations: opts.max_iter });
    }
    warn!("BiCGSTAB stopped with residual {residual:e}");
    Err(Error::Solver { reason: "BiCGSTAB did not converge".into(), residual })
}

/// Removes the surface mean: `p - (m . p) / sum(m)` with `m_i = int phi_i`.
pub fn project_zero_mean(p: &mut [f64], surface_mass: &[f64]) {
    let area: f64 = surface_mass.iter().sum();
    let mean = dot(p, surface_mass) / area;
    p.iter_mut().for_each(|v| *v -= mean);
}
