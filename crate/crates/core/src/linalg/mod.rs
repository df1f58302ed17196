//! Complex sparse matrices and the direct solver used for every linear solve.
//!
//! Symmetric matrices go through a supernodal `L D Lᵀ` ([`ldlt`]); anything
//! else, or a symmetric factor that fails its residual probe, through `faer`'s
//! sparse LU with partial pivoting. Both run sequentially so repeated runs
//! produce identical factors. Residual checks and iterative refinement live here.

mod ldlt;
pub mod ordering;

use std::fmt::Write as _;

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseRowMat, SymbolicSparseRowMat};
use faer::{Conj, Mat, Par};
use num_complex::Complex64 as c64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: matrix has {expected} rows, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(
        "matrix is singular to working precision; the discrete problem has no unique solution"
    )]
    Singular,
    #[error(
        "solve residual {residual:e} exceeds {tolerance:e} (condition estimate {condition:e})"
    )]
    IllConditioned {
        residual: f64,
        tolerance: f64,
        condition: f64,
    },
    #[error("sparse factorization failed: {0}")]
    Backend(String),
}

/// Relative residual every solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-9;
/// Residual above which one refinement step is taken.
pub const REFINE_THRESHOLD: f64 = 1e-10;

/// Compressed sparse row matrix with complex entries and sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<c64>,
}

impl CsrMatrix {
    /// Builds from raw parts; column indices must be sorted and unique per row.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<c64>,
    ) -> Self {
        assert_eq!(row_ptr.len(), nrows + 1);
        assert_eq!(col_idx.len(), values.len());
        assert_eq!(row_ptr[nrows], col_idx.len());
        debug_assert!((0..nrows).all(|r| col_idx[row_ptr[r]..row_ptr[r + 1]]
            .windows(2)
            .all(|w| w[0] < w[1])));
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sums duplicate entries in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, c64)]) -> Self {
        let mut rows: Vec<Vec<(usize, c64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            rows[r].push((c, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts(nrows, ncols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts(
            n,
            n,
            (0..=n).collect(),
            (0..n).collect(),
            vec![c64::new(1.0, 0.0); n],
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
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

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [c64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => c64::new(0.0, 0.0),
        }
    }

    /// Position of `(r, c)` in the value array, if structurally present.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .binary_search(&c)
            .ok()
            .map(|p| span.start + p)
    }

    pub fn mul_vec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y = Aᴴ x`.
    pub fn adjoint_mul_vec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![c64::new(0.0, 0.0); self.ncols];
        for (r, xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v.conj() * xr;
            }
        }
        y
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut col = vec![0.0; self.ncols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            col[*c] += v.norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    /// `a * self + b * other` for matrices with the same sparsity pattern.
    pub fn combine(&self, a: c64, other: &CsrMatrix, b: c64) -> CsrMatrix {
        assert!(
            self.row_ptr == other.row_ptr && self.col_idx == other.col_idx,
            "patterns differ"
        );
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(&other.values) {
            *o = a * *o + b * v;
        }
        out
    }

    /// Max over entries of `|A_ij − A_ji|`, relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).norm());
            }
        }
        worst / scale
    }

    /// Max over entries of `|A_ij − conj(A_ji)|`, relative to the largest entry.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst / scale
    }

    /// Coordinate text dump: one `row col re im` line per stored entry (0-based).
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::with_capacity(self.nnz() * 48);
        let _ = writeln!(out, "% {} {} {}", self.nrows, self.ncols, self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let _ = writeln!(out, "{r} {c} {:.17e} {:.17e}", v.re, v.im);
            }
        }
        out
    }
}

pub fn norm2(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Symmetry defect below which the symmetric factorization is tried first.
pub const SYMMETRY_TOLERANCE: f64 = 1e-13;

enum Backend {
    Symmetric(ldlt::SymmetricLdlt),
    Lu(faer::sparse::linalg::solvers::Lu<usize, c64>),
}

/// Which factorization [`factorize_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// `L D Lᵀ` when the matrix is symmetric and the factor passes a residual
    /// probe, LU otherwise.
    Auto,
    Lu,
}

/// Reusable factorization of a square sparse matrix.
pub struct Factorization<'a> {
    matrix: &'a CsrMatrix,
    backend: Backend,
}

impl std::fmt::Debug for Factorization<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.matrix.nrows)
            .field("symmetric", &self.is_symmetric())
            .finish_non_exhaustive()
    }
}

pub fn factorize(a: &CsrMatrix) -> Result<Factorization<'_>, SolverError> {
    factorize_with(a, Method::Auto, None)
}

/// With `points` (one per unknown) the symmetric path orders by geometric
/// nested dissection instead of minimum degree.
pub fn factorize_with<'a>(
    a: &'a CsrMatrix,
    method: Method,
    points: Option<&[[f64; 3]]>,
) -> Result<Factorization<'a>, SolverError> {
    if a.nrows != a.ncols {
        return Err(SolverError::NotSquare {
            rows: a.nrows,
            cols: a.ncols,
        });
    }
    if method == Method::Auto && a.nrows > 0 && a.symmetry_defect() <= SYMMETRY_TOLERANCE {
        if points.is_some_and(|p| p.len() != a.nrows) {
            return Err(SolverError::DimensionMismatch {
                expected: a.nrows,
                found: points.map_or(0, <[_]>::len),
            });
        }
        let order = points.map(|p| ordering::nested_dissection(a, p));
        let f = Factorization {
            matrix: a,
            backend: Backend::Symmetric(ldlt::SymmetricLdlt::factorize(a, order.as_deref())?),
        };
        if f.probe_passes() {
            return Ok(f);
        }
        log::warn!("symmetric factorization failed its residual probe, falling back to LU");
    }
    faer::set_global_parallelism(Par::Seq);
    let symbolic = SymbolicSparseRowMat::new_checked(
        a.nrows,
        a.ncols,
        a.row_ptr.clone(),
        None,
        a.col_idx.clone(),
    );
    let mat = SparseRowMat::new(symbolic, a.values.clone());
    let lu = mat.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { .. } => SolverError::Singular,
        other => SolverError::Backend(format!("{other:?}")),
    })?;
    let f = Factorization {
        matrix: a,
        backend: Backend::Lu(lu),
    };
    // a zero pivot shows up as non-finite output
    if a.nrows > 0 {
        let probe = f.raw_solve(&vec![c64::new(1.0, 0.0); a.nrows]);
        if probe.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SolverError::Singular);
        }
        let growth = norm2(&probe) / (a.nrows as f64).sqrt();
        if growth > 1e14 * (1.0 / a.norm_one().max(f64::MIN_POSITIVE)) {
            return Err(SolverError::Singular);
        }
    }
    Ok(f)
}

impl Factorization<'_> {
    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self.backend, Backend::Symmetric(_))
    }

    fn raw_solve(&self, b: &[c64]) -> Vec<c64> {
        match &self.backend {
            Backend::Symmetric(f) => {
                let mut x = b.to_vec();
                f.solve_in_place(&mut x);
                x
            }
            Backend::Lu(lu) => {
                let mut rhs = Mat::<c64>::from_fn(b.len(), 1, |i, _| b[i]);
                lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
                (0..b.len()).map(|i| rhs[(i, 0)]).collect()
            }
        }
    }

    /// No tiny pivots, then one solve plus one refinement step against an
    /// all-ones right-hand side.
    fn probe_passes(&self) -> bool {
        if let Backend::Symmetric(f) = &self.backend {
            if f.perturbed_pivots() > 0 {
                log::debug!("{} pivots raised to the floor", f.perturbed_pivots());
                return false;
            }
        }
        let b = vec![c64::new(1.0, 0.0); self.matrix.nrows];
        let mut x = self.raw_solve(&b);
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return false;
        }
        let r = self.residual(&x, &b);
        let dx = self.raw_solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        let first = norm2(&r) / norm2(&b);
        let rel = norm2(&self.residual(&x, &b)) / norm2(&b);
        log::debug!("probe residual {first:e}, refined {rel:e}");
        rel <= SOLVE_TOLERANCE
    }

    fn residual(&self, x: &[c64], b: &[c64]) -> Vec<c64> {
        let ax = self.matrix.mul_vec(x);
        b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect()
    }

    /// Solves `A x = b` to relative residual [`SOLVE_TOLERANCE`], taking one
    /// refinement step when the first residual exceeds [`REFINE_THRESHOLD`].
    pub fn solve(&self, b: &[c64]) -> Result<Vec<c64>, SolverError> {
        let n = self.matrix.nrows;
        if b.len() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![c64::new(0.0, 0.0); n]);
        }
        let mut x = self.raw_solve(b);
        let mut r = self.residual(&x, b);
        let mut rel = norm2(&r) / bnorm;
        if rel > REFINE_THRESHOLD {
            let dx = self.raw_solve(&r);
            for (xi, di) in x.iter_mut().zip(dx) {
                *xi += di;
            }
            r = self.residual(&x, b);
            rel = norm2(&r) / bnorm;
        }
        if !(rel <= SOLVE_TOLERANCE) {
            let xnorm: f64 = x.iter().map(|v| v.norm()).sum();
            let bnorm1: f64 = b.iter().map(|v| v.norm()).sum();
            return Err(SolverError::IllConditioned {
                residual: rel,
                tolerance: SOLVE_TOLERANCE,
                condition: self.matrix.norm_one() * xnorm / bnorm1,
            });
        }
        Ok(x)
    }
}

/// Factorizes and solves in one step.
pub fn solve(a: &CsrMatrix, b: &[c64]) -> Result<Vec<c64>, SolverError> {
    factorize(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn identity_solve() {
        let a = CsrMatrix::identity(5);
        let b: Vec<c64> = (0..5).map(|i| c(i as f64, -1.0)).collect();
        assert_eq!(solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn permutation_needs_pivoting() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        let x = solve(&a, &[c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn complex_diagonal() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, c(1.0, 1.0)), (1, 1, c(2.0, 0.0))]);
        let x = solve(&a, &[c(1.0, 1.0), c(4.0, 0.0)]).unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_rhs() {
        let a = CsrMatrix::from_triplets(
            2,
            2,
            &[
                (0, 0, c(3.0, 0.0)),
                (1, 1, c(2.0, 0.0)),
                (0, 1, c(1.0, 0.0)),
            ],
        );
        assert_eq!(solve(&a, &[c(0.0, 0.0); 2]).unwrap(), vec![c(0.0, 0.0); 2]);
    }

    #[test]
    fn singular_detected() {
        let a = CsrMatrix::from_triplets(
            2,
            2,
            &[
                (0, 0, c(1.0, 0.0)),
                (0, 1, c(2.0, 0.0)),
                (1, 0, c(2.0, 0.0)),
                (1, 1, c(4.0, 0.0)),
            ],
        );
        assert!(matches!(factorize(&a), Err(SolverError::Singular)));
        let empty_row = CsrMatrix::from_triplets(2, 2, &[(0, 0, c(1.0, 0.0)), (0, 1, c(1.0, 0.0))]);
        assert!(factorize(&empty_row).is_err());
    }

    #[test]
    fn symmetric_path_agrees_with_lu() {
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c(2.0 - (i % 5) as f64, 0.1)));
            if i + 1 < n {
                t.push((i, i + 1, c(1.0, 0.0)));
                t.push((i + 1, i, c(1.0, 0.0)));
            }
            if i + 7 < n {
                t.push((i, i + 7, c(0.0, 0.5)));
                t.push((i + 7, i, c(0.0, 0.5)));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<c64> = (0..n).map(|i| c(1.0, i as f64)).collect();
        let sym = factorize(&a).unwrap();
        assert!(sym.is_symmetric());
        let lu = factorize_with(&a, Method::Lu, None).unwrap();
        assert!(!lu.is_symmetric());
        let (x, y) = (sym.solve(&b).unwrap(), lu.solve(&b).unwrap());
        let diff: Vec<c64> = x.iter().zip(&y).map(|(p, q)| p - q).collect();
        assert!(norm2(&diff) <= 1e-10 * norm2(&y));
    }

    #[test]
    fn dimension_checks() {
        let a = CsrMatrix::identity(3);
        let f = factorize(&a).unwrap();
        assert!(matches!(
            f.solve(&[c(1.0, 0.0)]),
            Err(SolverError::DimensionMismatch { .. })
        ));
        let rect = CsrMatrix::from_triplets(2, 3, &[(0, 0, c(1.0, 0.0))]);
        assert!(matches!(
            factorize(&rect),
            Err(SolverError::NotSquare { .. })
        ));
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(
            2,
            2,
            &[
                (0, 0, c(1.0, 0.0)),
                (0, 0, c(2.0, 1.0)),
                (1, 0, c(1.0, 0.0)),
            ],
        );
        assert_eq!(a.get(0, 0), c(3.0, 1.0));
        assert_eq!(a.nnz(), 2);
        assert!(a.to_coordinate_text().lines().count() == 3);
    }
}
