//! Exact propagation: unitary evolution via eigendecomposition and open-system
//! evolution via the dense generator exponential.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{DensityMatrix, HermitianOperator, LindbladDissipator};

/// e^{-iHt} rho e^{+iHt}, diagonalizing H once.
pub fn evolve_unitary(h: &HermitianOperator, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let prop = UnitaryPropagator::new(h);
    prop.evolve(rho, t)
}

/// Cached eigendecomposition of a Hamiltonian, reused across evolution times.
pub struct UnitaryPropagator {
    dim: usize,
    eigenvalues: Vec<f64>,
    basis: DMatrix<Complex64>,
}

impl UnitaryPropagator {
    pub fn new(h: &HermitianOperator) -> Self {
        let (eigenvalues, basis) = h.eigen();
        Self { dim: h.dim(), eigenvalues, basis }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The unitary e^{-iHt}.
    pub fn matrix_at(&self, t: f64) -> DMatrix<Complex64> {
        let phases = DVector::from_iterator(
            self.dim,
            self.eigenvalues.iter().map(|&l| (-linalg::I * linalg::cplx(l * t)).exp()),
        );
        let mut phased = self.basis.clone();
        for (j, mut col) in phased.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        phased * self.basis.adjoint()
    }

    pub fn evolve_state(&self, psi: &DVector<Complex64>, t: f64) -> Result<DVector<Complex64>> {
        if psi.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state has dim {}, Hamiltonian has {}",
                psi.len(),
                self.dim
            )));
        }
        let mut coeffs = self.basis.adjoint() * psi;
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c *= (-linalg::I * linalg::cplx(self.eigenvalues[k] * t)).exp();
        }
        Ok(&self.basis * coeffs)
    }

    pub fn evolve(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let raw = self.evolve_raw(rho.entries(), t)?;
        DensityMatrix::from_evolution(raw)
    }

    pub(crate) fn evolve_raw(&self, rho: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
        if rho.nrows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state has dim {}, Hamiltonian has {}",
                rho.nrows(),
                self.dim
            )));
        }
        let u = self.matrix_at(t);
        Ok(&u * rho * u.adjoint())
    }
}

/// Dense generator of the master equation acting on column-stacked states:
/// -i(I (x) H - H^T (x) I) plus the dissipative part
/// sum_k gamma_k [ conj(V_k) (x) V_k - (I (x) V_k^dag V_k + (V_k^dag V_k)^T (x) I) / 2 ].
pub fn superoperator(h: &HermitianOperator, d: &LindbladDissipator) -> Result<DMatrix<Complex64>> {
    let n = h.dim();
    if let Some(dd) = d.dim() {
        if dd != n {
            return Err(Error::DimensionMismatch(format!(
                "dissipator dim {dd} does not match Hamiltonian dim {n}"
            )));
        }
    }
    let id = linalg::identity(n);
    let hm = h.entries();
    let mut gen = (id.kronecker(hm) - hm.transpose().kronecker(&id)) * (-linalg::I);
    for (rate, v) in d.effective_operators() {
        let vdv = v.adjoint() * &v;
        let jump = v.conjugate().kronecker(&v);
        let loss = id.kronecker(&vdv) + vdv.transpose().kronecker(&id);
        gen += (jump - loss * linalg::cplx(0.5)) * linalg::cplx(rate);
    }
    Ok(gen)
}

/// exp(t L)[rho] through the dense superoperator exponential.
pub fn evolve_lindblad(
    h: &HermitianOperator,
    d: &LindbladDissipator,
    rho: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    LindbladPropagator::new(h, d)?.evolve(rho, t)
}

/// Cached generator matrix for repeated open-system propagation.
pub struct LindbladPropagator {
    dim: usize,
    generator: DMatrix<Complex64>,
}

impl LindbladPropagator {
    pub fn new(h: &HermitianOperator, d: &LindbladDissipator) -> Result<Self> {
        Ok(Self { dim: h.dim(), generator: superoperator(h, d)? })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The matrix exp(t L), mapping column-stacked states forward by t.
    pub fn exponential(&self, t: f64) -> DMatrix<Complex64> {
        (&self.generator * linalg::cplx(t)).exp()
    }

    pub fn evolve(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let raw = self.evolve_raw(rho.entries(), t)?;
        DensityMatrix::from_evolution(raw)
    }

    pub(crate) fn evolve_raw(&self, rho: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
        if rho.nrows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state has dim {}, generator expects {}",
                rho.nrows(),
                self.dim
            )));
        }
        let out = self.exponential(t) * linalg::vec_of(rho);
        Ok(linalg::unvec(&out, self.dim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit;
    use approx::assert_abs_diff_eq;

    fn off_diagonal_state() -> DensityMatrix {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                linalg::cplx(0.5),
                Complex64::new(0.3, 0.1),
                Complex64::new(0.3, -0.1),
                linalg::cplx(0.5),
            ],
        );
        DensityMatrix::new(m).unwrap()
    }

    #[test]
    fn zero_time_evolution_is_identity() {
        let h = HermitianOperator::from_real_rows(2, &[0.4, 1.1, 1.1, -0.2]).unwrap();
        let rho = off_diagonal_state();
        let out = evolve_unitary(&h, &rho, 0.0).unwrap();
        assert!(crate::linalg::max_abs(&(out.entries() - rho.entries())) < 1e-13);
    }

    #[test]
    fn eigenstate_is_stationary() {
        let h = HermitianOperator::new(qubit::sigma_z()).unwrap();
        let rho = DensityMatrix::basis_state(2, 0).unwrap();
        let out = evolve_unitary(&h, &rho, 7.3).unwrap();
        assert!(crate::linalg::max_abs(&(out.entries() - rho.entries())) < 1e-12);
    }

    #[test]
    fn empty_dissipator_reduces_to_unitary_evolution() {
        let h = HermitianOperator::from_real_rows(2, &[0.4, 1.1, 1.1, -0.2]).unwrap();
        let rho = off_diagonal_state();
        let a = evolve_unitary(&h, &rho, 2.37).unwrap();
        let b = evolve_lindblad(&h, &LindbladDissipator::empty(), &rho, 2.37).unwrap();
        assert!(crate::linalg::max_abs(&(a.entries() - b.entries())) < 1e-10);
    }

    #[test]
    fn pure_dephasing_damps_coherences_only() {
        let gamma = 0.8;
        let t = 1.9;
        let h = HermitianOperator::zero(2);
        let d = LindbladDissipator::pure_dephasing(gamma).unwrap();
        let rho = off_diagonal_state();
        let out = evolve_lindblad(&h, &d, &rho, t).unwrap();
        let damp = (-gamma * t / 2.0).exp();
        assert_abs_diff_eq!(out.entries()[(0, 1)].re, 0.3 * damp, epsilon = 1e-10);
        assert_abs_diff_eq!(out.entries()[(0, 1)].im, 0.1 * damp, epsilon = 1e-10);
        assert_abs_diff_eq!(out.entries()[(0, 0)].re, 0.5, epsilon = 1e-10);
    }

    #[test]
    fn symmetric_relaxation_decays_z_exponentially() {
        let rate = 0.35;
        let h = HermitianOperator::zero(2);
        let d = LindbladDissipator::relaxation(rate, rate).unwrap();
        let rho = DensityMatrix::basis_state(2, 0).unwrap();
        for &t in &[0.3, 1.0, 2.5] {
            let out = evolve_lindblad(&h, &d, &rho, t).unwrap();
            let z = qubit::bloch_from_density(&out).unwrap().z;
            assert_abs_diff_eq!(z, (-2.0 * rate * t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = HermitianOperator::zero(3);
        let rho = DensityMatrix::basis_state(2, 0).unwrap();
        assert!(matches!(evolve_unitary(&h, &rho, 1.0), Err(Error::DimensionMismatch(_))));
        let d = LindbladDissipator::pure_dephasing(0.1).unwrap();
        assert!(matches!(superoperator(&h, &d), Err(Error::DimensionMismatch(_))));
    }
}
