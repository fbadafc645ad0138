//! Shared helpers for the integration suites: an independent Runge-Kutta
//! reference integrator and randomized problem generators.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qsysid::{DensityMatrix, HermitianOperator, LindbladDissipator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> HermitianOperator {
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    HermitianOperator::new(h).expect("symmetrized")
}

/// Random dissipator with up to two terms at modest rates; may be empty.
pub fn random_dissipator(rng: &mut ChaCha8Rng, dim: usize, max_terms: usize) -> LindbladDissipator {
    let n_terms = rng.gen_range(0..=max_terms);
    if n_terms == 0 {
        return LindbladDissipator::empty();
    }
    let terms = (0..n_terms)
        .map(|_| {
            let v = DMatrix::from_fn(dim, dim, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            (rng.gen_range(0.01..0.3), v)
        })
        .collect();
    LindbladDissipator::new(terms).expect("positive rates")
}

/// Random full-rank density matrix via A A^dagger normalization.
pub fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let m = &a * a.adjoint();
    let trace = m.trace().re;
    DensityMatrix::new(m / Complex64::new(trace, 0.0)).expect("normalized Gram matrix")
}

/// Random pure density matrix |psi><psi|.
pub fn random_pure_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
    let v = DVector::from_fn(dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let v = &v / Complex64::new(v.norm(), 0.0);
    DensityMatrix::from_state_vector(&v).expect("normalized vector")
}

fn lindblad_rhs(
    h: &DMatrix<Complex64>,
    terms: &[(f64, DMatrix<Complex64>)],
    rho: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    let mut out = (rho * h - h * rho) * i;
    for (rate, v) in terms {
        let vdv = v.adjoint() * v;
        let jump = v * rho * v.adjoint();
        let anti = (&vdv * rho + rho * &vdv) * Complex64::new(0.5, 0.0);
        out += (jump - anti) * Complex64::new(*rate, 0.0);
    }
    out
}

/// Classical fourth-order Runge-Kutta integration of the master equation,
/// sharing no code with the crate's eigendecomposition propagator.
pub fn rk4_lindblad(
    h: &HermitianOperator,
    d: &LindbladDissipator,
    rho0: &DensityMatrix,
    t: f64,
    steps: usize,
) -> DMatrix<Complex64> {
    let h = h.entries().clone();
    let terms: Vec<(f64, DMatrix<Complex64>)> = d
        .effective_operators()
        .into_iter()
        .collect();
    let dt = t / steps as f64;
    let half = Complex64::new(dt / 2.0, 0.0);
    let sixth = Complex64::new(dt / 6.0, 0.0);
    let two = Complex64::new(2.0, 0.0);
    let mut rho = rho0.entries().clone();
    for _ in 0..steps {
        let k1 = lindblad_rhs(&h, &terms, &rho);
        let k2 = lindblad_rhs(&h, &terms, &(&rho + &k1 * half));
        let k3 = lindblad_rhs(&h, &terms, &(&rho + &k2 * half));
        let k4 = lindblad_rhs(&h, &terms, &(&rho + &k3 * Complex64::new(dt, 0.0)));
        rho += (k1 + k2 * two + k3 * two + k4) * sixth;
    }
    rho
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix, for positivity checks.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Gram-Schmidt orthonormalization for small real-entry spans.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<DVector<Complex64>> {
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    for v in vectors {
        let mut u = DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)));
        for b in &basis {
            let overlap = b.dotc(&u);
            u -= b * overlap;
        }
        let norm = u.norm();
        assert!(norm > 1e-12, "vectors must be linearly independent");
        basis.push(u / Complex64::new(norm, 0.0));
    }
    basis
}
