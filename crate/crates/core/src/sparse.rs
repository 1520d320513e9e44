//! Sparse symmetric linear algebra: CSR storage, deterministic
//! matrix-vector products, conjugate gradients with block-Jacobi
//! preconditioning and optional null-space deflation, and a dense Cholesky
//! fallback for small systems.
//!
//! Reproducibility rules: the CSR build sums duplicate entries in sorted
//! order, the parallel matrix-vector product assigns whole rows to threads
//! (each row is a fixed-order dot product), and all CG inner products are
//! sequential — results are bitwise identical for any thread count.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("conjugate gradients stagnated: residual {residual:.3e} after {iterations} iterations (target {target:.3e})")]
    Stagnated { residual: f64, target: f64, iterations: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Square sparse matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

/// Triplet accumulator; duplicates are summed at build time.
#[derive(Debug, Clone)]
pub struct CsrBuilder {
    n: usize,
    triplets: Vec<(u32, u32, f64)>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        assert!(n < u32::MAX as usize);
        Self { n, triplets: Vec::new() }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        if value != 0.0 {
            self.triplets.push((row as u32, col as u32, value));
        }
    }

    pub fn extend_from(&mut self, other: CsrBuilder) {
        debug_assert_eq!(self.n, other.n);
        self.triplets.extend(other.triplets);
    }

    pub fn build(mut self) -> Csr {
        // Stable sort: duplicate (row, col) runs keep their insertion order,
        // so mirrored symmetric contributions sum in identical order and the
        // built matrix is bitwise symmetric when its inputs are.
        self.triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx: Vec<u32> = Vec::with_capacity(self.triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for &(r, c, v) in &self.triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
            row_ptr[r as usize + 1] = col_idx.len();
        }
        // Rows without entries inherit the previous row's end.
        for i in 1..=self.n {
            row_ptr[i] = row_ptr[i].max(row_ptr[i - 1]);
        }
        Csr { n: self.n, row_ptr, col_idx, values }
    }
}

impl Csr {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// `y = A x`. Row-parallel when `threads > 1`; bitwise identical for
    /// any thread count.
    pub fn spmv(&self, x: &[f64], y: &mut [f64], threads: usize) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        let row = |i: usize| -> f64 {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c as usize];
            }
            acc
        };
        if threads > 1 {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c as usize)] = *v;
            }
        }
        m
    }

    /// Dense sub-block `[start, start+len) × [start, start+len)`.
    fn diag_block(&self, start: usize, len: usize) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(len, len);
        for i in 0..len {
            let (cols, vals) = self.row(start + i);
            for (c, v) in cols.iter().zip(vals) {
                let c = *c as usize;
                if c >= start && c < start + len {
                    b[(i, c - start)] = *v;
                }
            }
        }
        b
    }
}

/// Block-Jacobi preconditioner over caller-defined index blocks (one per
/// patch in the solver). Blocks are factored by Cholesky with a diagonal
/// fallback for semi-definite blocks.
pub struct BlockJacobi {
    blocks: Vec<(usize, usize, BlockFactor)>,
}

enum BlockFactor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Diag(Vec<f64>),
}

impl BlockJacobi {
    pub fn new(a: &Csr, block_starts: &[usize]) -> Self {
        let mut blocks = Vec::with_capacity(block_starts.len().saturating_sub(1));
        for w in block_starts.windows(2) {
            let (start, len) = (w[0], w[1] - w[0]);
            if len == 0 {
                continue;
            }
            let dense = a.diag_block(start, len);
            let factor = match nalgebra::Cholesky::new(dense.clone()) {
                Some(c) => BlockFactor::Chol(c),
                None => BlockFactor::Diag(
                    (0..len)
                        .map(|i| {
                            let d = dense[(i, i)];
                            if d > 0.0 { 1.0 / d } else { 1.0 }
                        })
                        .collect(),
                ),
            };
            blocks.push((start, len, factor));
        }
        Self { blocks }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (start, len, factor) in &self.blocks {
            match factor {
                BlockFactor::Chol(c) => {
                    let mut v = nalgebra::DVector::from_column_slice(&r[*start..start + len]);
                    c.solve_mut(&mut v);
                    z[*start..start + len].copy_from_slice(v.as_slice());
                }
                BlockFactor::Diag(d) => {
                    for (i, di) in d.iter().enumerate() {
                        z[start + i] = r[start + i] * di;
                    }
                }
            }
        }
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects `v` onto the orthogonal complement of the span of `basis`
/// (assumed mutually orthonormal).
fn deflate(v: &mut [f64], basis: &[Vec<f64>]) {
    for z in basis {
        let c = dot(v, z);
        for (vi, zi) in v.iter_mut().zip(z) {
            *vi -= c * zi;
        }
    }
}

/// Orthonormalizes the given vectors (modified Gram–Schmidt), dropping
/// near-dependent ones.
pub fn orthonormalize(mut vecs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vecs.len());
    for v in vecs.iter_mut() {
        for q in &out {
            let c = dot(v, q);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        let norm = dot(v, v).sqrt();
        if norm > 1e-12 {
            out.push(v.iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Preconditioned conjugate gradients for a symmetric positive
/// (semi-)definite system, with optional deflation of a known null space
/// (pass the null-space vectors orthonormalized). The right-hand side is
/// projected to the compatible subspace first.
pub fn cg(
    a: &Csr,
    b: &[f64],
    x0: Option<&[f64]>,
    precon: Option<&BlockJacobi>,
    null_space: &[Vec<f64>],
    rtol: f64,
    max_iter: usize,
    threads: usize,
) -> Result<CgResult, SolveError> {
    let n = a.n();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut b = b.to_vec();
    deflate(&mut b, null_space);
    deflate(&mut x, null_space);

    let b_norm = dot(&b, &b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgResult { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let target = rtol * b_norm;

    let mut r = vec![0.0; n];
    a.spmv(&x, &mut r, threads);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    deflate(&mut r, null_space);

    let mut z = vec![0.0; n];
    let apply_precon = |r: &[f64], z: &mut [f64]| {
        match precon {
            Some(p) => p.apply(r, z),
            None => z.copy_from_slice(r),
        }
    };
    apply_precon(&r, &mut z);
    deflate(&mut z, null_space);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt();
    let mut ap = vec![0.0; n];

    let mut iterations = 0;
    while res > target && iterations < max_iter {
        a.spmv(&p, &mut ap, threads);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolveError::NotPositiveDefinite);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        deflate(&mut r, null_space);
        apply_precon(&r, &mut z);
        deflate(&mut z, null_space);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt();
        iterations += 1;
    }

    if res > target {
        return Err(SolveError::Stagnated { residual: res / b_norm, target: rtol, iterations });
    }
    Ok(CgResult { x, iterations, residual: res / b_norm })
}

/// Direct dense Cholesky solve; intended for systems below a few thousand
/// unknowns.
pub fn dense_cholesky_solve(a: &Csr, b: &[f64]) -> Result<Vec<f64>, SolveError> {
    let dense = a.to_dense();
    let chol = nalgebra::Cholesky::new(dense).ok_or(SolveError::NotPositiveDefinite)?;
    let mut v = nalgebra::DVector::from_column_slice(b);
    chol.solve_mut(&mut v);
    Ok(v.as_slice().to_vec())
}
