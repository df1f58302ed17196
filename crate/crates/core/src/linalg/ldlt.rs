//! Supernodal `L D Lᵀ` for complex symmetric matrices (transpose, not adjoint).
//!
//! The symbolic phase (minimum degree ordering, supernode partition, row
//! patterns) comes from `faer`; the numeric factorization below is
//! left-looking over supernodes with dense blocked kernels inside each one.
//! There is no pivoting: pivots smaller than a fixed fraction of the largest
//! matrix entry are replaced by that floor and counted.

use faer::linalg::matmul::matmul;
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, SymbolicCholeskyRaw, SymmetricOrdering,
};
use faer::sparse::linalg::{SupernodalThreshold, SymbolicSupernodalParams};
use faer::sparse::SymbolicSparseColMatRef;
use faer::{Accum, MatMut, MatRef, Par, Side};
use num_complex::Complex64 as c64;

use super::{CsrMatrix, SolverError};

const BLOCK: usize = 64;
/// Pivot floor relative to the largest entry of the matrix.
const PIVOT_FLOOR: f64 = 1e-10;

pub(crate) struct SymmetricLdlt {
    n: usize,
    /// `perm[i]` is the original index of permuted index `i`.
    perm: Vec<usize>,
    begin: Vec<usize>,
    pattern_ptr: Vec<usize>,
    pattern: Vec<usize>,
    value_ptr: Vec<usize>,
    /// Per supernode, a column-major `(w + r) × w` block; unit lower triangle
    /// below the diagonal, `D` on it.
    values: Vec<c64>,
    perturbed: usize,
}

impl SymmetricLdlt {
    /// `order[new] = old`; minimum degree when absent.
    pub(crate) fn factorize(a: &CsrMatrix, order: Option<&[usize]>) -> Result<Self, SolverError> {
        let n = a.nrows();
        let mut f = Self::symbolic(a, order)?;
        log::debug!(
            "symmetric factor: {n} unknowns, {} stored entries",
            f.value_ptr.last().unwrap_or(&0)
        );
        f.numeric(a);
        debug_assert_eq!(f.n, n);
        Ok(f)
    }

    pub(crate) fn perturbed_pivots(&self) -> usize {
        self.perturbed
    }

    #[cfg(test)]
    fn factor_entries(&self) -> usize {
        self.values.len()
    }

    fn symbolic(a: &CsrMatrix, order: Option<&[usize]>) -> Result<Self, SolverError> {
        let n = a.nrows();
        let pattern_a = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let params = CholeskySymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            supernodal_params: SymbolicSupernodalParams::default(),
            ..Default::default()
        };
        let inverse: Option<Vec<usize>> = order.map(|o| {
            let mut inv = vec![0; n];
            for (i, &p) in o.iter().enumerate() {
                inv[p] = i;
            }
            inv
        });
        let ordering = match (order, &inverse) {
            (Some(o), Some(inv)) => SymmetricOrdering::Custom(PermRef::new_checked(o, inv, n)),
            _ => SymmetricOrdering::Amd,
        };
        let sym = factorize_symbolic_cholesky(pattern_a, Side::Lower, ordering, params)
            .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        let perm = match sym.perm() {
            Some(p) => p.arrays().0.to_vec(),
            None => (0..n).collect(),
        };
        let mut begin = vec![0];
        let mut pattern_ptr = vec![0];
        let mut pattern = Vec::new();
        let mut value_ptr = vec![0];
        let mut push = |b: usize, e: usize, rows: &[usize]| {
            pattern.extend_from_slice(rows);
            pattern_ptr.push(pattern.len());
            begin.push(e);
            let w = e - b;
            value_ptr.push(value_ptr.last().unwrap() + (w + rows.len()) * w);
        };
        match sym.raw() {
            SymbolicCholeskyRaw::Supernodal(s) => {
                for k in 0..s.n_supernodes() {
                    push(
                        s.supernode_begin()[k],
                        s.supernode_end()[k],
                        s.supernode(k).pattern(),
                    );
                }
            }
            // chosen by faer when there is nothing to eliminate, e.g. a diagonal matrix
            SymbolicCholeskyRaw::Simplicial(s) => {
                let (ptr, idx) = (s.col_ptr(), s.row_idx());
                for j in 0..n {
                    let rows: Vec<usize> = idx[ptr[j]..ptr[j + 1]]
                        .iter()
                        .copied()
                        .filter(|&r| r > j)
                        .collect();
                    push(j, j + 1, &rows);
                }
            }
        }
        Ok(Self {
            n,
            perm,
            begin,
            pattern_ptr,
            pattern,
            value_ptr,
            values: Vec::new(),
            perturbed: 0,
        })
    }

    fn supernodes(&self) -> usize {
        self.begin.len() - 1
    }

    fn rows(&self, s: usize) -> &[usize] {
        &self.pattern[self.pattern_ptr[s]..self.pattern_ptr[s + 1]]
    }

    fn numeric(&mut self, a: &CsrMatrix) {
        let n = self.n;
        let ns = self.supernodes();
        let mut inverse = vec![0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            inverse[p] = i;
        }
        let floor = PIVOT_FLOOR
            * a.values()
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);

        let mut owner = vec![0; n];
        for s in 0..ns {
            owner[self.begin[s]..self.begin[s + 1]].fill(s);
        }
        // supernodes whose row pattern reaches into each supernode's columns
        let mut updaters: Vec<Vec<usize>> = vec![Vec::new(); ns];
        for d in 0..ns {
            let mut last = usize::MAX;
            for &r in self.rows(d) {
                let o = owner[r];
                if o != last {
                    updaters[o].push(d);
                    last = o;
                }
            }
        }
        drop(owner);

        let mut values = vec![c64::new(0.0, 0.0); *self.value_ptr.last().unwrap_or(&0)];
        let mut local = vec![usize::MAX; n];
        let mut scaled: Vec<c64> = Vec::new();
        let mut product: Vec<c64> = Vec::new();
        let mut perturbed = 0;

        for s in 0..ns {
            let (b, e) = (self.begin[s], self.begin[s + 1]);
            let w = e - b;
            let rows = self.rows(s);
            let m = w + rows.len();
            for j in b..e {
                local[j] = j - b;
            }
            for (t, &r) in rows.iter().enumerate() {
                local[r] = w + t;
            }
            let (done, rest) = values.split_at_mut(self.value_ptr[s]);
            let block = &mut rest[..m * w];

            for j in b..e {
                for (c, v) in a.row(self.perm[j]) {
                    let i = inverse[c];
                    if i >= j {
                        block[local[i] + (j - b) * m] += v;
                    }
                }
            }

            for &d in &updaters[s] {
                let (bd, ed) = (self.begin[d], self.begin[d + 1]);
                let wd = ed - bd;
                let rows_d = self.rows(d);
                let md = wd + rows_d.len();
                let i0 = rows_d.partition_point(|&r| r < b);
                let i1 = rows_d.partition_point(|&r| r < e);
                let q = rows_d.len() - i0;
                let cols = i1 - i0;
                let ld = &done[self.value_ptr[d]..self.value_ptr[d] + md * wd];
                let ld_rows =
                    MatRef::from_column_major_slice_with_stride(&ld[wd + i0..], q, wd, md);
                scaled.clear();
                scaled.resize(wd * cols, c64::new(0.0, 0.0));
                for c in 0..cols {
                    for k in 0..wd {
                        scaled[k + c * wd] = ld[k + k * md] * ld[wd + i0 + c + k * md];
                    }
                }
                product.clear();
                product.resize(q * cols, c64::new(0.0, 0.0));
                matmul(
                    MatMut::from_column_major_slice_mut(&mut product, q, cols),
                    Accum::Replace,
                    ld_rows,
                    MatRef::from_column_major_slice(&scaled, wd, cols),
                    c64::new(1.0, 0.0),
                    Par::Seq,
                );
                for c in 0..cols {
                    let col = rows_d[i0 + c] - b;
                    for r in c..q {
                        block[local[rows_d[i0 + r]] + col * m] -= product[r + c * q];
                    }
                }
            }

            perturbed += factor_block(block, m, w, floor, &mut scaled);
        }
        self.values = values;
        self.perturbed = perturbed;
    }

    /// Solves in place; `x` enters as the right-hand side.
    pub(crate) fn solve_in_place(&self, x: &mut [c64]) {
        let mut y: Vec<c64> = self.perm.iter().map(|&p| x[p]).collect();
        let ns = self.supernodes();
        for s in 0..ns {
            let (b, e) = (self.begin[s], self.begin[s + 1]);
            let w = e - b;
            let rows = self.rows(s);
            let m = w + rows.len();
            let block = &self.values[self.value_ptr[s]..self.value_ptr[s + 1]];
            for jj in 0..w {
                let yj = y[b + jj];
                let col = &block[jj * m..(jj + 1) * m];
                for ii in jj + 1..w {
                    y[b + ii] -= col[ii] * yj;
                }
                for (t, &r) in rows.iter().enumerate() {
                    y[r] -= col[w + t] * yj;
                }
            }
        }
        for s in 0..ns {
            let (b, e) = (self.begin[s], self.begin[s + 1]);
            let m = e - b + self.rows(s).len();
            let block = &self.values[self.value_ptr[s]..self.value_ptr[s + 1]];
            for jj in 0..e - b {
                y[b + jj] /= block[jj + jj * m];
            }
        }
        for s in (0..ns).rev() {
            let (b, e) = (self.begin[s], self.begin[s + 1]);
            let w = e - b;
            let rows = self.rows(s);
            let m = w + rows.len();
            let block = &self.values[self.value_ptr[s]..self.value_ptr[s + 1]];
            for jj in (0..w).rev() {
                let col = &block[jj * m..(jj + 1) * m];
                let mut acc = y[b + jj];
                for ii in jj + 1..w {
                    acc -= col[ii] * y[b + ii];
                }
                for (t, &r) in rows.iter().enumerate() {
                    acc -= col[w + t] * y[r];
                }
                y[b + jj] = acc;
            }
        }
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
    }
}

/// Dense right-looking `L D Lᵀ` of the leading `w` columns of an `m × w`
/// column-major block. Returns the number of pivots raised to `floor`.
fn factor_block(
    block: &mut [c64],
    m: usize,
    w: usize,
    floor: f64,
    scratch: &mut Vec<c64>,
) -> usize {
    let mut perturbed = 0;
    let mut jb = 0;
    while jb < w {
        let je = (jb + BLOCK).min(w);
        for j in jb..je {
            let mut d = block[j + j * m];
            if d.norm() < floor {
                d = if d.norm() == 0.0 {
                    c64::new(floor, 0.0)
                } else {
                    d * (floor / d.norm())
                };
                block[j + j * m] = d;
                perturbed += 1;
            }
            let inv = d.inv();
            for i in j + 1..m {
                block[i + j * m] *= inv;
            }
            for k in j + 1..je {
                let f = d * block[k + j * m];
                let (left, right) = block.split_at_mut(k * m);
                let lj = &left[j * m..(j + 1) * m];
                let ak = &mut right[..m];
                for i in k..m {
                    ak[i] -= lj[i] * f;
                }
            }
        }
        if je < w {
            let nb = je - jb;
            let trailing = w - je;
            scratch.clear();
            scratch.resize(nb * trailing, c64::new(0.0, 0.0));
            for c in 0..trailing {
                for k in 0..nb {
                    let col = jb + k;
                    scratch[k + c * nb] = block[col + col * m] * block[je + c + col * m];
                }
            }
            let (left, right) = block.split_at_mut(je * m);
            let panel =
                MatRef::from_column_major_slice_with_stride(&left[jb * m + je..], m - je, nb, m);
            let dst = MatMut::from_column_major_slice_with_stride_mut(
                &mut right[je..],
                m - je,
                trailing,
                m,
            );
            matmul(
                dst,
                Accum::Add,
                panel,
                MatRef::from_column_major_slice(scratch, nb, trailing),
                c64::new(-1.0, 0.0),
                Par::Seq,
            );
        }
        jb = je;
    }
    perturbed
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, density: f64, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((
                i,
                i,
                c64::new(4.0 + rng.gen::<f64>(), rng.gen::<f64>() - 0.5),
            ));
            for j in 0..i {
                if rng.gen::<f64>() < density {
                    let v = c64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    fn residual(a: &CsrMatrix, x: &[c64], b: &[c64]) -> f64 {
        let ax = a.mul_vec(x);
        ax.iter()
            .zip(b)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn solves_random_complex_symmetric_systems() {
        for (n, density, seed) in [(1, 0.0, 1), (7, 0.5, 2), (150, 0.05, 3), (400, 0.02, 4)] {
            let a = random_symmetric(n, density, seed);
            let f = SymmetricLdlt::factorize(&a, None).unwrap();
            assert_eq!(f.perturbed_pivots(), 0);
            let b: Vec<c64> = (0..n)
                .map(|i| c64::new(i as f64 + 1.0, -(i as f64) * 0.5))
                .collect();
            let mut x = b.clone();
            f.solve_in_place(&mut x);
            assert!(residual(&a, &x, &b) < 1e-11, "n={n}");
        }
    }

    #[test]
    fn indefinite_without_small_pivots() {
        // symmetric, indefinite, zero-free diagonal
        let t = vec![
            (0, 0, c64::new(1.0, 0.0)),
            (0, 1, c64::new(2.0, 0.0)),
            (1, 0, c64::new(2.0, 0.0)),
            (1, 1, c64::new(1.0, 0.0)),
            (2, 2, c64::new(-3.0, 1.0)),
        ];
        let a = CsrMatrix::from_triplets(3, 3, &t);
        let f = SymmetricLdlt::factorize(&a, None).unwrap();
        let b = vec![c64::new(1.0, 0.0), c64::new(0.0, 1.0), c64::new(2.0, 0.0)];
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        assert!(residual(&a, &x, &b) < 1e-13);
    }

    #[test]
    fn block_kernel_matches_unblocked_size() {
        // a dense matrix wider than one block exercises the trailing update
        let a = random_symmetric(3 * BLOCK + 5, 1.0, 9);
        let f = SymmetricLdlt::factorize(&a, None).unwrap();
        let b: Vec<c64> = (0..a.nrows()).map(|i| c64::new(1.0, i as f64)).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        assert!(residual(&a, &x, &b) < 1e-10);
        assert!(f.factor_entries() >= a.nrows() * (a.nrows() + 1) / 2);
    }
}
