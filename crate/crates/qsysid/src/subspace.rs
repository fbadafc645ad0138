//! Exact leakage out of a chosen subspace and best-fit planes for trajectories.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolve::UnitaryPropagator;
use crate::linalg;
use crate::operators::HermitianOperator;
use crate::tol;

/// Projector onto the span of the given computational basis states.
pub fn projector_onto_basis(dim: usize, indices: &[usize]) -> Result<HermitianOperator> {
    let mut m = DMatrix::zeros(dim, dim);
    for &i in indices {
        if i >= dim {
            return Err(Error::InvalidState(format!("basis index {i} out of range for dim {dim}")));
        }
        m[(i, i)] = linalg::ONE;
    }
    HermitianOperator::new(m)
}

/// Projector onto the span of the given vectors, orthonormalized in order.
pub fn projector_onto_span(vectors: &[DVector<Complex64>]) -> Result<HermitianOperator> {
    if vectors.is_empty() {
        return Err(Error::RankDeficient("no spanning vectors given".into()));
    }
    let dim = vectors[0].len();
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(vectors.len());
    for (k, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "spanning vector {k} has dim {}, expected {dim}",
                v.len()
            )));
        }
        let mut w = v.clone();
        for b in &basis {
            let overlap = b.dotc(&w);
            w -= b * overlap;
        }
        let original = v.norm();
        let residual = w.norm();
        if original == 0.0 || residual < 1e-10 * original {
            return Err(Error::RankDeficient(format!(
                "spanning vector {k} is linearly dependent on the preceding ones"
            )));
        }
        basis.push(w / linalg::cplx(residual));
    }
    let mut m = DMatrix::zeros(dim, dim);
    for b in &basis {
        m += b * b.adjoint();
    }
    HermitianOperator::new(linalg::hermitize(&m))
}

/// Checks idempotency; the Hermitian part is guaranteed by the input type.
pub fn validate_projector(p: &HermitianOperator) -> Result<()> {
    let m = p.entries();
    let defect = linalg::max_abs(&(m * m - m));
    if defect > tol::PROJECTOR {
        return Err(Error::NotProjector(format!("idempotency defect {defect:.3e}")));
    }
    Ok(())
}

fn basis_vector(dim: usize, index: usize) -> Result<DVector<Complex64>> {
    if index >= dim {
        return Err(Error::InvalidState(format!("basis index {index} out of range for dim {dim}")));
    }
    let mut v = DVector::zeros(dim);
    v[index] = linalg::ONE;
    Ok(v)
}

fn check_projector_dim(p: &HermitianOperator, dim: usize) -> Result<()> {
    if p.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "projector dim {} does not match system dim {dim}",
            p.dim()
        )));
    }
    validate_projector(p)
}

/// 1 - <psi(t)| P |psi(t)> for |psi(0)> a computational basis state.
pub fn subspace_leak_probability(
    h: &HermitianOperator,
    p: &HermitianOperator,
    psi0: usize,
    t: f64,
) -> Result<f64> {
    check_projector_dim(p, h.dim())?;
    let prop = UnitaryPropagator::new(h);
    let psi = prop.evolve_state(&basis_vector(h.dim(), psi0)?, t)?;
    Ok(leak_of(&psi, p))
}

/// 1 - <psi(t_k)| P |psi(t_k)> at every grid time, sharing one diagonalization.
pub fn leak_probability_curve(
    h: &HermitianOperator,
    p: &HermitianOperator,
    psi0: usize,
    times: &[f64],
) -> Result<Vec<f64>> {
    check_projector_dim(p, h.dim())?;
    let prop = UnitaryPropagator::new(h);
    let start = basis_vector(h.dim(), psi0)?;
    times
        .iter()
        .map(|&t| Ok(leak_of(&prop.evolve_state(&start, t)?, p)))
        .collect()
}

fn leak_of(psi: &DVector<Complex64>, p: &HermitianOperator) -> f64 {
    let kept = psi.dotc(&(p.entries() * psi)).re;
    (1.0 - kept).clamp(0.0, 1.0)
}

/// Orthonormal basis of the best rank-2 fit to a trajectory, with a flag for
/// trajectories that never leave a single ray.
pub struct TrajectoryPlane {
    pub basis: Vec<DVector<Complex64>>,
    pub degenerate: bool,
}

impl TrajectoryPlane {
    pub fn projector(&self) -> Result<HermitianOperator> {
        projector_onto_span(&self.basis)
    }
}

/// Top-2 left singular vectors of the matrix whose columns are e^{-iHt_k}|psi0>,
/// computed through the trajectory's state-space Gram matrix.
pub fn best_fit_2d_subspace(
    h: &HermitianOperator,
    psi0: usize,
    t_grid: &[f64],
) -> Result<TrajectoryPlane> {
    if t_grid.len() < 2 {
        return Err(Error::InvalidGrid(format!(
            "best-fit plane needs at least 2 time points, got {}",
            t_grid.len()
        )));
    }
    let dim = h.dim();
    let prop = UnitaryPropagator::new(h);
    let start = basis_vector(dim, psi0)?;
    let mut gram = DMatrix::<Complex64>::zeros(dim, dim);
    for &t in t_grid {
        let psi = prop.evolve_state(&start, t)?;
        gram += &psi * psi.adjoint();
    }
    let (weights, vectors) = linalg::hermitian_eigen(&linalg::hermitize(&gram));
    let s1 = weights[0].max(0.0).sqrt();
    let s2 = weights[1].max(0.0).sqrt();
    let first = vectors.column(0).clone_owned();
    if s2 <= s1 * 1e-10 {
        return Ok(TrajectoryPlane { basis: vec![first], degenerate: true });
    }
    Ok(TrajectoryPlane { basis: vec![first, vectors.column(1).clone_owned()], degenerate: false })
}

/// Mean of <psi(t_k)| P |psi(t_k)> over the grid.
pub fn mean_plane_projection(
    h: &HermitianOperator,
    p: &HermitianOperator,
    psi0: usize,
    t_grid: &[f64],
) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(Error::InvalidGrid("mean projection needs at least 1 time point".into()));
    }
    let curve = leak_probability_curve(h, p, psi0, t_grid)?;
    Ok(1.0 - curve.iter().sum::<f64>() / curve.len() as f64)
}

/// Acute angles between two subspaces given as orthonormal bases, ascending.
pub fn principal_angles(a: &[DVector<Complex64>], b: &[DVector<Complex64>]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::RankDeficient("principal angles need non-empty bases".into()));
    }
    let k = a.len().min(b.len());
    let mut overlaps = DMatrix::<Complex64>::zeros(a.len(), b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            if ai.len() != bj.len() {
                return Err(Error::DimensionMismatch(
                    "principal-angle bases live in different dims".into(),
                ));
            }
            overlaps[(i, j)] = ai.dotc(bj);
        }
    }
    let mut cosines: Vec<f64> = overlaps.svd(false, false).singular_values.iter().copied().collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    Ok(cosines.iter().take(k).map(|c| c.min(1.0).acos()).collect())
}
