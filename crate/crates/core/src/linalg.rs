//! Thin bridge between `ndarray` storage and `faer` dense decompositions.
//!
//! All routines run sequentially so that results are bit-identical from run to
//! run.

use faer::{c64, linalg::solvers::SolveLstsq, Mat, MatRef, Side};
use ndarray as nd;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

fn with_view<R>(m: &nd::Array2<C64>, f: impl FnOnce(MatRef<'_, c64>) -> R) -> R {
    let std = m.as_standard_layout();
    let (r, c) = std.dim();
    let slice = std.as_slice().expect("standard layout is contiguous");
    f(MatRef::from_row_major_slice(slice, r, c))
}

/// Gram matrix `G[j][k] = sum_i m[i][j] * conj(m[i][k])`.
///
/// For an amplitude matrix `m` with rows indexing the traced-out subsystem this
/// is the reduced density matrix of the column subsystem.
pub fn column_gram(m: &nd::Array2<C64>) -> nd::Array2<C64> {
    // (m^H m)[j][k] = sum_i conj(m[i][j]) m[i][k], the transpose of what we want
    let g: Mat<c64> = with_view(m, |v| v.adjoint() * v);
    let n = g.nrows();
    nd::Array2::from_shape_fn((n, n), |(j, k)| g[(k, j)])
}

/// Eigenvalues of a Hermitian matrix in descending order.
pub fn hermitian_eigenvalues(m: &nd::Array2<C64>) -> Result<Vec<f64>> {
    let mut vals = with_view(m, |v| v.self_adjoint_eigenvalues(Side::Lower))
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    vals.reverse();
    Ok(vals)
}

/// Eigenvalues (descending) and matching eigenvectors (as columns).
pub fn hermitian_eigen(m: &nd::Array2<C64>) -> Result<(Vec<f64>, nd::Array2<C64>)> {
    let evd = with_view(m, |v| v.self_adjoint_eigen(Side::Lower))
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let n = m.nrows();
    let s = evd.S().column_vector();
    let u = evd.U();
    let vals = (0..n).rev().map(|k| s[k].re).collect();
    let vecs = nd::Array2::from_shape_fn((n, n), |(i, k)| u[(i, n - 1 - k)]);
    Ok((vals, vecs))
}

/// Singular values in descending order.
pub fn singular_values(m: &nd::Array2<C64>) -> Result<Vec<f64>> {
    with_view(m, |v| v.singular_values())
        .map_err(|e| Error::Decomposition(format!("{e:?}")))
}

/// Least-squares solution of `design * x = rhs` for a real, row-major design
/// matrix with `ncols` columns.
pub fn real_lstsq(design: &[f64], ncols: usize, rhs: &[f64]) -> Vec<f64> {
    let nrows = rhs.len();
    debug_assert_eq!(design.len(), nrows * ncols);
    let a = MatRef::from_row_major_slice(design, nrows, ncols);
    let b = Mat::<f64>::from_fn(nrows, 1, |i, _| rhs[i]);
    let x = a.qr().solve_lstsq(&b);
    (0..ncols).map(|k| x[(k, 0)]).collect()
}
