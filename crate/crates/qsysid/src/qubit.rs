//! Bloch-sphere geometry and the axis-angle form of two-level Hamiltonians.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{DensityMatrix, HermitianOperator};
use crate::tol;

pub fn sigma_0() -> DMatrix<Complex64> {
    DMatrix::identity(2, 2)
}

pub fn sigma_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[linalg::ZERO, linalg::ONE, linalg::ONE, linalg::ZERO])
}

pub fn sigma_y() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[linalg::ZERO, -linalg::I, linalg::I, linalg::ZERO])
}

pub fn sigma_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[linalg::ONE, linalg::ZERO, linalg::ZERO, -linalg::ONE])
}

/// Expectation 3-vector (Tr rho sigma_x, Tr rho sigma_y, Tr rho sigma_z).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let s = Self { x, y, z };
        if s.norm() > 1.0 + tol::BLOCH_NORM_SLACK {
            return Err(Error::BlochNormExceeded(s.norm()));
        }
        Ok(s)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }
}

/// Two-level Hamiltonian parameters: trace part d0, rotation rate omega,
/// declination theta from the measurement axis, and azimuth phi.
///
/// `degenerate` marks omega = 0, where the axis direction carries no meaning
/// and theta, phi are fixed at zero rather than left arbitrary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisAngles {
    pub d0: f64,
    pub omega: f64,
    pub theta: f64,
    pub phi: f64,
    pub degenerate: bool,
}

impl AxisAngles {
    pub fn from_polar(d0: f64, omega: f64, theta: f64, phi: f64) -> Result<Self> {
        if omega < 0.0 {
            return Err(Error::AngleOutOfRange { name: "omega", value: omega, range: "[0, inf)" });
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::AngleOutOfRange { name: "theta", value: theta, range: "[0, pi]" });
        }
        if omega < tol::DEGENERATE_OMEGA {
            return Ok(Self { d0, omega: 0.0, theta: 0.0, phi: 0.0, degenerate: true });
        }
        Ok(Self { d0, omega, theta, phi: wrap_angle(phi), degenerate: false })
    }

    pub fn from_cartesian(d0: f64, dx: f64, dy: f64, dz: f64) -> Self {
        let omega = (dx * dx + dy * dy + dz * dz).sqrt();
        if omega < tol::DEGENERATE_OMEGA {
            return Self { d0, omega: 0.0, theta: 0.0, phi: 0.0, degenerate: true };
        }
        Self {
            d0,
            omega,
            theta: (dz / omega).clamp(-1.0, 1.0).acos(),
            phi: dy.atan2(dx),
            degenerate: false,
        }
    }

    /// The vector (d_x, d_y, d_z) = omega * (sin t cos p, sin t sin p, cos t).
    pub fn cartesian(&self) -> [f64; 3] {
        [
            self.omega * self.theta.sin() * self.phi.cos(),
            self.omega * self.theta.sin() * self.phi.sin(),
            self.omega * self.theta.cos(),
        ]
    }

    /// Unit rotation axis; errors when the rate is too small to define one.
    pub fn unit_axis(&self) -> Result<BlochVector> {
        if self.degenerate || self.omega < tol::DEGENERATE_OMEGA {
            return Err(Error::DegenerateAxis);
        }
        let [dx, dy, dz] = self.cartesian();
        Ok(BlochVector { x: dx / self.omega, y: dy / self.omega, z: dz / self.omega })
    }
}

pub(crate) fn wrap_angle(phi: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut p = phi % two_pi;
    if p <= -std::f64::consts::PI {
        p += two_pi;
    } else if p > std::f64::consts::PI {
        p -= two_pi;
    }
    p
}

/// Reads (d0, omega, theta, phi) off a two-level Hamiltonian via Pauli traces.
pub fn axis_angles_from_hamiltonian(h: &HermitianOperator) -> Result<AxisAngles> {
    if h.dim() != 2 {
        return Err(Error::DimensionMismatch(format!("axis angles need dim 2, got {}", h.dim())));
    }
    let m = h.entries();
    let d0 = m.trace().re;
    let dx = (m * sigma_x()).trace().re;
    let dy = (m * sigma_y()).trace().re;
    let dz = (m * sigma_z()).trace().re;
    Ok(AxisAngles::from_cartesian(d0, dx, dy, dz))
}

/// H = (d0 sigma_0 + d_x sigma_x + d_y sigma_y + d_z sigma_z) / 2.
pub fn hamiltonian_from_axis_angles(a: &AxisAngles) -> HermitianOperator {
    let [dx, dy, dz] = a.cartesian();
    let m = (sigma_0() * linalg::cplx(a.d0)
        + sigma_x() * linalg::cplx(dx)
        + sigma_y() * linalg::cplx(dy)
        + sigma_z() * linalg::cplx(dz))
        * linalg::cplx(0.5);
    HermitianOperator::new(m).expect("Pauli combination with real weights is Hermitian")
}

pub fn bloch_from_density(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch(format!("Bloch vector needs dim 2, got {}", rho.dim())));
    }
    let m = rho.entries();
    Ok(BlochVector {
        x: (m * sigma_x()).trace().re,
        y: (m * sigma_y()).trace().re,
        z: (m * sigma_z()).trace().re,
    })
}

pub fn density_from_bloch(s: &BlochVector) -> Result<DensityMatrix> {
    if s.norm() > 1.0 + tol::BLOCH_NORM_SLACK {
        return Err(Error::BlochNormExceeded(s.norm()));
    }
    let m = (sigma_0()
        + sigma_x() * linalg::cplx(s.x)
        + sigma_y() * linalg::cplx(s.y)
        + sigma_z() * linalg::cplx(s.z))
        * linalg::cplx(0.5);
    DensityMatrix::new(linalg::hermitize(&m))
}

/// Rotates `s` by `angle` radians about the axis direction.
///
/// The sign convention is the one realized by the propagators:
/// `rotate_bloch(axis, omega * t, s)` equals the Bloch vector of
/// `evolve_unitary(H, rho, t)` for the matching Hamiltonian and state,
/// an identity pinned down by the cross-module equivalence tests.
pub fn rotate_bloch(axis: &AxisAngles, angle: f64, s: &BlochVector) -> Result<BlochVector> {
    let k = axis.unit_axis()?;
    let (sin, cos) = angle.sin_cos();
    let kxs = k.cross(s);
    let kds = k.dot(s);
    Ok(BlochVector {
        x: s.x * cos + kxs.x * sin + k.x * kds * (1.0 - cos),
        y: s.y * cos + kxs.y * sin + k.y * kds * (1.0 - cos),
        z: s.z * cos + kxs.z * sin + k.z * kds * (1.0 - cos),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn pauli_algebra_holds() {
        let xy = sigma_x() * sigma_y();
        let expect = sigma_z() * linalg::I;
        assert!(crate::linalg::max_abs(&(xy - expect)) < 1e-15);
        assert!(crate::linalg::max_abs(&(sigma_x() * sigma_x() - sigma_0())) < 1e-15);
    }

    #[test]
    fn bloch_of_reference_states() {
        let s = bloch_from_density(&DensityMatrix::basis_state(2, 0).unwrap()).unwrap();
        assert_abs_diff_eq!(s.z, 1.0, epsilon = 1e-14);
        let s = bloch_from_density(&DensityMatrix::maximally_mixed(2)).unwrap();
        assert_abs_diff_eq!(s.norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn density_from_bloch_matches_closed_form_eigenvalues() {
        let s = BlochVector::new(0.3, 0.4, 0.5).unwrap();
        let rho = density_from_bloch(&s).unwrap();
        let (vals, _) = linalg::hermitian_eigen(rho.entries());
        let r = s.norm();
        assert_abs_diff_eq!(vals[0], (1.0 + r) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], (1.0 - r) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn density_from_bloch_rejects_norm_above_one() {
        let s = BlochVector { x: 0.8, y: 0.8, z: 0.0 };
        assert!(matches!(density_from_bloch(&s).unwrap_err(), Error::BlochNormExceeded(_)));
    }

    #[test]
    fn axis_angles_of_sigma_z_hamiltonian() {
        let h = HermitianOperator::new(sigma_z() * linalg::cplx(0.5)).unwrap();
        let a = axis_angles_from_hamiltonian(&h).unwrap();
        assert_abs_diff_eq!(a.omega, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.theta, 0.0, epsilon = 1e-12);
        assert!(!a.degenerate);
    }

    #[test]
    fn reference_axis_hamiltonian_inverts_exactly() {
        let a = AxisAngles::from_polar(0.0, 1.0, FRAC_PI_4, 0.0).unwrap();
        let h = hamiltonian_from_axis_angles(&a);
        let v = FRAC_PI_4.sin() / 2.0;
        assert_abs_diff_eq!(h.entries()[(0, 1)].re, v, epsilon = 1e-12);
        assert_abs_diff_eq!(h.entries()[(0, 0)].re, v, epsilon = 1e-12);
        let back = axis_angles_from_hamiltonian(&h).unwrap();
        assert_abs_diff_eq!(back.omega, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back.theta, FRAC_PI_4, epsilon = 1e-12);
        assert_abs_diff_eq!(back.phi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_rate_hamiltonian_is_flagged_degenerate() {
        let a = AxisAngles::from_polar(5.0, 0.0, 0.0, 0.0).unwrap();
        assert!(a.degenerate);
        let h = hamiltonian_from_axis_angles(&a);
        assert_abs_diff_eq!(h.entries()[(0, 0)].re, 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(h.entries()[(0, 1)].norm(), 0.0, epsilon = 1e-14);
        assert!(matches!(rotate_bloch(&a, 1.0, &BlochVector { x: 0.0, y: 0.0, z: 1.0 }), Err(Error::DegenerateAxis)));
    }

    #[test]
    fn rotation_by_pi_about_tilted_axis_maps_pole_to_equator() {
        let axis = AxisAngles::from_polar(0.0, 1.0, FRAC_PI_4, 0.0).unwrap();
        let s = rotate_bloch(&axis, PI, &BlochVector { x: 0.0, y: 0.0, z: 1.0 }).unwrap();
        assert_abs_diff_eq!(s.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_at_three_eighths_pi_lands_on_equator() {
        let axis = AxisAngles::from_polar(0.0, 1.0, 3.0 * PI / 8.0, 0.0).unwrap();
        let s = rotate_bloch(&axis, 1.7432, &BlochVector { x: 0.0, y: 0.0, z: 1.0 }).unwrap();
        assert_abs_diff_eq!(s.z, 0.0, epsilon = 1e-4);
    }

    #[test]
    fn zero_angle_rotation_is_identity() {
        let axis = AxisAngles::from_polar(0.0, 2.0, 1.1, 0.4).unwrap();
        let s0 = BlochVector::new(0.2, -0.3, 0.5).unwrap();
        let s = rotate_bloch(&axis, 0.0, &s0).unwrap();
        assert_abs_diff_eq!(s.x, s0.x, epsilon = 1e-15);
        assert_abs_diff_eq!(s.y, s0.y, epsilon = 1e-15);
        assert_abs_diff_eq!(s.z, s0.z, epsilon = 1e-15);
    }

    #[test]
    fn sigma_z_axis_rotation_is_counterclockwise_in_xy() {
        let axis = AxisAngles::from_polar(0.0, 1.0, 0.0, 0.0).unwrap();
        let s = rotate_bloch(&axis, FRAC_PI_2, &BlochVector { x: 1.0, y: 0.0, z: 0.0 }).unwrap();
        assert_abs_diff_eq!(s.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x, 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn axis_angle_round_trip(
            d0 in -2.0..2.0f64,
            omega in 0.05..5.0f64,
            theta in 0.0..std::f64::consts::PI,
            phi in -3.1..3.1f64,
        ) {
            let a = AxisAngles::from_polar(d0, omega, theta, phi).unwrap();
            let h = hamiltonian_from_axis_angles(&a);
            let b = axis_angles_from_hamiltonian(&h).unwrap();
            prop_assert!((a.omega - b.omega).abs() < 1e-10);
            prop_assert!((a.theta - b.theta).abs() < 1e-10);
            let [ax, ay, az] = a.cartesian();
            let [bx, by, bz] = b.cartesian();
            prop_assert!((ax - bx).abs() < 1e-10 && (ay - by).abs() < 1e-10 && (az - bz).abs() < 1e-10);
        }

        #[test]
        fn bloch_density_round_trip(x in -0.57..0.57f64, y in -0.57..0.57f64, z in -0.57..0.57f64) {
            let s = BlochVector::new(x, y, z).unwrap();
            let rho = density_from_bloch(&s).unwrap();
            let back = bloch_from_density(&rho).unwrap();
            prop_assert!((back.x - x).abs() < 1e-12);
            prop_assert!((back.y - y).abs() < 1e-12);
            prop_assert!((back.z - z).abs() < 1e-12);
        }

        #[test]
        fn rotations_preserve_norm(
            theta in 0.01..3.13f64,
            phi in -3.1..3.1f64,
            angle in -10.0..10.0f64,
        ) {
            let axis = AxisAngles::from_polar(0.0, 1.0, theta, phi).unwrap();
            let s0 = BlochVector::new(0.1, 0.5, -0.6).unwrap();
            let s = rotate_bloch(&axis, angle, &s0).unwrap();
            prop_assert!((s.norm() - s0.norm()).abs() < 1e-12);
        }
    }
}
