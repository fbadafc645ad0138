//! Small complex-matrix helpers shared by the quantum modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub(crate) fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Column-stacks a matrix into a vector.
pub(crate) fn vec_of(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`] for square matrices.
pub(crate) fn unvec(v: &DVector<Complex64>, dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Largest absolute deviation from conjugate symmetry, with the offending index.
pub(crate) fn hermiticity_defect(m: &DMatrix<Complex64>) -> (f64, (usize, usize)) {
    let n = m.nrows();
    let mut worst = 0.0;
    let mut at = (0, 0);
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
                at = (i, j);
            }
        }
    }
    (worst, at)
}

/// Replaces a matrix by its Hermitian part, wiping accumulated rounding noise.
pub(crate) fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * cplx(0.5)
}

pub(crate) fn identity(dim: usize) -> DMatrix<Complex64> {
    DMatrix::identity(dim, dim)
}

pub(crate) fn trace_re(m: &DMatrix<Complex64>) -> f64 {
    m.trace().re
}

/// Largest entry modulus.
pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|e| e.norm()).fold(0.0, f64::max)
}

pub(crate) fn is_unitary_within(m: &DMatrix<Complex64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let gram = m.adjoint() * m;
    max_abs(&(gram - identity(m.nrows()))) <= tol
}

/// Eigenvalues and eigenvectors of a Hermitian matrix, sorted by descending eigenvalue.
pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = hermitize(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}
