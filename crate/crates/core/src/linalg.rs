//! Thin sparse/dense complex linear algebra layer.
//!
//! Matrices are assembled into triplets in a fixed order and merged
//! deterministically, so assembled operators are bit-reproducible.
//! Factorizations are direct (sparse LU resp. dense partial-pivot LU);
//! every solve verifies its residual.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

pub use faer::c64;

/// Deterministic triplet accumulator for a complex sparse matrix.
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, c64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: c64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> ComplexSparseMatrix {
        // stable sort keeps the insertion order of duplicates, so the
        // sequential merge below is reproducible
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut merged: Vec<Triplet<usize, usize, c64>> = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            match merged.last_mut() {
                Some(t) if t.row == r && t.col == c => t.val += v,
                _ => merged.push(Triplet::new(r, c, v)),
            }
        }
        let mat = SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &merged)
            .expect("triplet indices validated on push");
        ComplexSparseMatrix { mat }
    }
}

/// Sparse complex matrix in compressed column layout.
#[derive(Clone)]
pub struct ComplexSparseMatrix {
    mat: SparseColMat<usize, c64>,
}

impl ComplexSparseMatrix {
    pub fn nrows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn matvec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.ncols());
        let r = self.mat.as_ref();
        let mut y = vec![c64::ZERO; self.nrows()];
        for j in 0..self.ncols() {
            let xj = x[j];
            if xj == c64::ZERO {
                continue;
            }
            let rows = r.row_idx_of_col_raw(j);
            let vals = r.val_of_col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// y = A x for a sparse x given as sorted (index, value) pairs.
    pub fn matvec_sparse(&self, x: &[(usize, c64)]) -> Vec<c64> {
        let r = self.mat.as_ref();
        let mut y = vec![c64::ZERO; self.nrows()];
        for &(j, xj) in x {
            let rows = r.row_idx_of_col_raw(j);
            let vals = r.val_of_col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// y = A^T x (no conjugation), column-wise dot products.
    pub fn matvec_transpose(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.nrows());
        let r = self.mat.as_ref();
        let mut y = vec![c64::ZERO; self.ncols()];
        for j in 0..self.ncols() {
            let rows = r.row_idx_of_col_raw(j);
            let vals = r.val_of_col(j);
            let mut acc = c64::ZERO;
            for (&i, &v) in rows.iter().zip(vals) {
                acc += v * x[i];
            }
            y[j] = acc;
        }
        y
    }

    /// Visit every stored entry as (row, col, value), column-major order.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, c64)) {
        let r = self.mat.as_ref();
        for j in 0..self.ncols() {
            let rows = r.row_idx_of_col_raw(j);
            let vals = r.val_of_col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                f(i, j, v);
            }
        }
    }

    /// Entrywise conjugate (for complex symmetric forms this equals the
    /// conjugate transpose).
    pub fn conj(&self) -> ComplexSparseMatrix {
        let r = self.mat.as_ref();
        let mut b = TripletBuilder::new(self.nrows(), self.ncols());
        for j in 0..self.ncols() {
            let rows = r.row_idx_of_col_raw(j);
            let vals = r.val_of_col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                b.push(i, j, v.conj());
            }
        }
        b.build()
    }

    /// Hermitian asymmetry ||A - A^H||_F (diagnostic).
    pub fn hermitian_defect(&self) -> f64 {
        let a = self.to_dense();
        let mut s = 0.0;
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                let d = a[(i, j)] - a[(j, i)].conj();
                s += d.norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let r = self.mat.as_ref();
        let mut out = Mat::zeros(self.nrows(), self.ncols());
        for j in 0..self.ncols() {
            let rows = r.row_idx_of_col_raw(j);
            let vals = r.val_of_col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn factorize(&self) -> Result<SparseLu> {
        let lu = self
            .mat
            .sp_lu()
            .map_err(|e| Error::SolveFailed(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu {
            lu,
            mat: self.mat.clone(),
        })
    }

    /// One factorize-and-solve with residual verification.
    pub fn solve(&self, rhs: &[c64]) -> Result<Vec<c64>> {
        self.factorize()?.solve(rhs)
    }

    /// Dump in coordinate text format: `row col re im` per line.
    pub fn dump_coordinate<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let r = self.mat.as_ref();
        writeln!(w, "{} {} {}", self.nrows(), self.ncols(), r.compute_nnz())?;
        for j in 0..self.ncols() {
            let rows = r.row_idx_of_col_raw(j);
            let vals = r.val_of_col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                writeln!(w, "{} {} {:.16e} {:.16e}", i, j, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// A sparse LU factorization, reusable over multiple right-hand sides.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, c64>,
    mat: SparseColMat<usize, c64>,
}

pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

impl SparseLu {
    pub fn solve(&self, rhs: &[c64]) -> Result<Vec<c64>> {
        let n = self.mat.nrows();
        assert_eq!(rhs.len(), n);
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let sol: Vec<c64> = (0..n).map(|i| x[(i, 0)]).collect();
        verify_residual(&self.mat, &sol, rhs)?;
        Ok(sol)
    }

    /// Solve several right-hand sides against one factorization.
    pub fn solve_many(&self, rhs: &[Vec<c64>]) -> Result<Vec<Vec<c64>>> {
        rhs.iter().map(|b| self.solve(b)).collect()
    }
}

fn verify_residual(mat: &SparseColMat<usize, c64>, x: &[c64], b: &[c64]) -> Result<()> {
    let r = mat.as_ref();
    let mut res = b.to_vec();
    for j in 0..mat.ncols() {
        let xj = x[j];
        let rows = r.row_idx_of_col_raw(j);
        let vals = r.val_of_col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            res[i] -= v * xj;
        }
    }
    let rn = norm2(&res);
    let bn = norm2(b);
    if bn == 0.0 {
        return Ok(());
    }
    let rel = rn / bn;
    if !rel.is_finite() || rel > SOLVE_RESIDUAL_TOL {
        return Err(Error::ResidualTooLarge {
            residual: rel,
            tol: SOLVE_RESIDUAL_TOL,
        });
    }
    Ok(())
}

pub fn norm2(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot_conj(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense complex solve with residual verification (for the coarse
/// Petrov-Galerkin system).
pub fn dense_solve(a: &Mat<c64>, rhs: &[c64]) -> Result<Vec<c64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(rhs.len(), n);
    let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    let lu = a.partial_piv_lu();
    let x = lu.solve(&b);
    let sol: Vec<c64> = (0..n).map(|i| x[(i, 0)]).collect();
    let mut res = rhs.to_vec();
    for j in 0..n {
        for i in 0..n {
            res[i] -= a[(i, j)] * sol[j];
        }
    }
    let bn = norm2(rhs);
    if bn > 0.0 {
        let rel = norm2(&res) / bn;
        if !rel.is_finite() || rel > SOLVE_RESIDUAL_TOL {
            return Err(Error::ResidualTooLarge {
                residual: rel,
                tol: SOLVE_RESIDUAL_TOL,
            });
        }
    }
    Ok(sol)
}

/// Smallest singular value of L^-1 M L^-H where G = L L^H is the (real,
/// SPD) Gram matrix of the norm: the discrete inf-sup surrogate of M in
/// the norm induced by G.
pub fn normalized_min_singular_value(m: &Mat<c64>, gram: &Mat<c64>) -> Result<f64> {
    Ok(normalized_singular_range(m, gram)?.1)
}

/// Largest and smallest singular values of L^-1 M L^-H with G = L L^H:
/// the continuity and inf-sup constants of M in the norm induced by G.
pub fn normalized_singular_range(m: &Mat<c64>, gram: &Mat<c64>) -> Result<(f64, f64)> {
    let n = m.nrows();
    assert_eq!(gram.nrows(), n);
    let llt = gram
        .llt(faer::Side::Lower)
        .map_err(|_| Error::SolveFailed("Gram matrix not positive definite".into()))?;
    let l = llt.L();
    // N = L^-1 M L^-H: forward-solve on both sides
    let mut work = m.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(
        l.as_ref(),
        work.as_mut(),
        faer::get_global_parallelism(),
    );
    // right side: N L^H = work  =>  N = work (L^H)^-1 = (L^-1 work^H)^H
    let mut wh = work.adjoint().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(
        l.as_ref(),
        wh.as_mut(),
        faer::get_global_parallelism(),
    );
    let nmat = wh.adjoint().to_owned();
    let svd = nmat
        .svd()
        .map_err(|e| Error::SolveFailed(format!("svd failed: {e:?}")))?;
    let s = svd.S();
    Ok((s[0].re, s[n - 1].re))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_duplicates() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, c64::new(1.0, 0.0));
        b.push(0, 0, c64::new(2.0, 1.0));
        b.push(1, 1, c64::new(1.0, 0.0));
        let m = b.build();
        let d = m.to_dense();
        assert_eq!(d[(0, 0)], c64::new(3.0, 1.0));
        assert_eq!(d[(1, 0)], c64::ZERO);
    }

    #[test]
    fn sparse_solve_roundtrip() {
        let mut b = TripletBuilder::new(3, 3);
        for i in 0..3 {
            b.push(i, i, c64::new(2.0 + i as f64, 0.5));
        }
        b.push(0, 1, c64::new(0.0, 1.0));
        b.push(2, 0, c64::new(-1.0, 0.0));
        let m = b.build();
        let x_true = vec![c64::new(1.0, -1.0), c64::new(0.5, 0.0), c64::new(-2.0, 3.0)];
        let rhs = m.matvec(&x_true);
        let x = m.solve(&rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_solve_roundtrip() {
        let a = Mat::from_fn(4, 4, |i, j| {
            if i == j {
                c64::new(3.0, 1.0)
            } else {
                c64::new(0.1 * (i as f64 - j as f64), 0.05)
            }
        });
        let x_true: Vec<c64> = (0..4).map(|i| c64::new(i as f64, -1.0)).collect();
        let mut rhs = vec![c64::ZERO; 4];
        for j in 0..4 {
            for i in 0..4 {
                rhs[i] += a[(i, j)] * x_true[j];
            }
        }
        let x = dense_solve(&a, &rhs).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn normalized_singular_value_identity_gram() {
        // with G = I the result is just the smallest singular value
        let m = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c64::new((i + 1) as f64, 0.0)
            } else {
                c64::ZERO
            }
        });
        let g = Mat::from_fn(3, 3, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::ZERO });
        let s = normalized_min_singular_value(&m, &g).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_singular_value_scaled_gram() {
        // M = G = diag(4, 9): N = I, smallest singular value 1
        let m = Mat::from_fn(2, 2, |i, j| {
            if i == j {
                c64::new([4.0, 9.0][i], 0.0)
            } else {
                c64::ZERO
            }
        });
        let s = normalized_min_singular_value(&m, &m).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
