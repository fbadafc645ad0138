//! Ready-made devices used by the examples and the test suite: a 10-level
//! system that is nearly but not exactly a qubit, clean qubits with chosen
//! rotation axes, decohering qubits, and a control-dependent family.

use std::collections::BTreeMap;

use crate::device::{DeviceModel, Observable};
use crate::error::Result;
use crate::operators::{
    ControlledHamiltonian, DensityMatrix, HermitianOperator, LindbladDissipator,
};
use crate::qubit::{hamiltonian_from_axis_angles, sigma_x, sigma_z, AxisAngles};

/// 10-level Hamiltonian with a strongly coupled 2-level block plus weak
/// couplings to the rest; its dynamics from `|0>` stays 99.9%-confined to a
/// plane tilted slightly away from span{`|0>`, `|1>`}.
pub fn ten_level_hamiltonian() -> HermitianOperator {
    #[rustfmt::skip]
    let rows = [
        1.3701, 1.0000, 0.0093, 0.0055, 0.0112, 0.0068, 0.0119, 0.0084, 0.0065, 0.0087,
        1.0000, 1.5561, 0.0109, 0.0132, 0.0067, 0.0061, 0.0081, 0.0051, 0.0105, 0.0029,
        0.0093, 0.0109, 1.6603, 0.0034, 0.0161, 0.0100, 0.0101, 0.0123, 0.0115, 0.0055,
        0.0055, 0.0132, 0.0034, 1.9112, 0.0136, 0.0072, 0.0093, 0.0062, 0.0133, 0.0101,
        0.0112, 0.0067, 0.0161, 0.0136, 3.4611, 0.0022, 0.0119, 0.0078, 0.0064, 0.0122,
        0.0068, 0.0061, 0.0100, 0.0072, 0.0022, 4.3017, 0.0074, 0.0077, 0.0029, 0.0080,
        0.0119, 0.0081, 0.0101, 0.0093, 0.0119, 0.0074, 6.8732, 0.0133, 0.0158, 0.0154,
        0.0084, 0.0051, 0.0123, 0.0062, 0.0078, 0.0077, 0.0133, 7.3491, 0.0071, 0.0073,
        0.0065, 0.0105, 0.0115, 0.0133, 0.0064, 0.0029, 0.0158, 0.0071, 8.1876, 0.0108,
        0.0087, 0.0029, 0.0055, 0.0101, 0.0122, 0.0080, 0.0154, 0.0073, 0.0108, 8.9032,
    ];
    HermitianOperator::from_real_rows(10, &rows).expect("symmetric by construction")
}

/// The 10-level system with a detector resolving every basis state, starting
/// each experiment in `|0>`.
pub fn ten_level_device() -> DeviceModel {
    let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
    DeviceModel::new(
        ControlledHamiltonian::fixed(ten_level_hamiltonian()),
        LindbladDissipator::empty(),
        Observable::from_eigenvalues(&values).expect("distinct eigenvalues"),
        DensityMatrix::basis_state(10, 0).expect("dim 10"),
    )
    .expect("consistent dims")
}

/// The 10-level system with a detector that only tells `|0>` (outcome +1)
/// apart from everything else (outcome -1).
pub fn ten_level_zero_detector_device() -> DeviceModel {
    let mut values = vec![-1.0; 10];
    values[0] = 1.0;
    DeviceModel::new(
        ControlledHamiltonian::fixed(ten_level_hamiltonian()),
        LindbladDissipator::empty(),
        Observable::from_eigenvalues(&values).expect("two outcomes"),
        DensityMatrix::basis_state(10, 0).expect("dim 10"),
    )
    .expect("consistent dims")
}

fn qubit_hamiltonian(omega: f64, theta: f64, phi: f64) -> Result<HermitianOperator> {
    Ok(hamiltonian_from_axis_angles(&AxisAngles::from_polar(0.0, omega, theta, phi)?))
}

/// Clean qubit rotating about the axis (theta, phi) at rate omega, read out
/// along z, starting from the maximally mixed state.
pub fn qubit_device(omega: f64, theta: f64, phi: f64) -> Result<DeviceModel> {
    DeviceModel::new(
        ControlledHamiltonian::fixed(qubit_hamiltonian(omega, theta, phi)?),
        LindbladDissipator::empty(),
        Observable::sigma_z(),
        DensityMatrix::maximally_mixed(2),
    )
}

/// Label selecting the reference Hamiltonian in two-setting devices.
pub const REFERENCE_CONTROL: &str = "reference";
/// Label selecting the Hamiltonian under study in two-setting devices.
pub const TARGET_CONTROL: &str = "target";

/// Qubit with two named settings: a reference axis in the x-z plane (its
/// azimuth defines phi = 0) and a target axis at (omega, theta, phi).
pub fn two_setting_qubit_device(
    omega_ref: f64,
    theta_ref: f64,
    target: (f64, f64, f64),
) -> Result<DeviceModel> {
    let mut table = BTreeMap::new();
    table.insert(REFERENCE_CONTROL.to_string(), qubit_hamiltonian(omega_ref, theta_ref, 0.0)?);
    let (omega, theta, phi) = target;
    table.insert(TARGET_CONTROL.to_string(), qubit_hamiltonian(omega, theta, phi)?);
    DeviceModel::new(
        ControlledHamiltonian::table(table)?,
        LindbladDissipator::empty(),
        Observable::sigma_z(),
        DensityMatrix::maximally_mixed(2),
    )
}

/// Qubit rotating about x at omega0 and dephasing along its own rotation
/// axis, so `z(t) = exp(-gamma t / 2) cos(omega0 t)`.
pub fn dephasing_qubit(omega0: f64, gamma: f64) -> Result<DeviceModel> {
    let h = HermitianOperator::new(sigma_x() * num_complex::Complex64::new(omega0 / 2.0, 0.0))?;
    let v = sigma_x() * num_complex::Complex64::new(0.5, 0.0);
    DeviceModel::new(
        ControlledHamiltonian::fixed(h),
        LindbladDissipator::new(vec![(gamma, v)])?,
        Observable::sigma_z(),
        DensityMatrix::maximally_mixed(2),
    )
}

/// Qubit rotating about the measurement axis with dephasing along it: the
/// populations never move, so repeated measurements always agree.
pub fn dephasing_qubit_z(omega0: f64, gamma: f64) -> Result<DeviceModel> {
    let h = HermitianOperator::new(sigma_z() * num_complex::Complex64::new(omega0 / 2.0, 0.0))?;
    DeviceModel::new(
        ControlledHamiltonian::fixed(h),
        LindbladDissipator::pure_dephasing(gamma)?,
        Observable::sigma_z(),
        DensityMatrix::maximally_mixed(2),
    )
}

/// Qubit rotating about the measurement axis while relaxing symmetrically in
/// both directions at the given rate, so flips accumulate toward 1/2.
pub fn relaxation_qubit_z(omega0: f64, rate: f64) -> Result<DeviceModel> {
    let h = HermitianOperator::new(sigma_z() * num_complex::Complex64::new(omega0 / 2.0, 0.0))?;
    DeviceModel::new(
        ControlledHamiltonian::fixed(h),
        LindbladDissipator::relaxation(rate, rate)?,
        Observable::sigma_z(),
        DensityMatrix::maximally_mixed(2),
    )
}

/// The control values and setting labels of [`quadratic_control_device`].
pub fn quadratic_control_settings() -> Vec<(f64, String)> {
    (1..=10).map(|k| {
        let f = 0.2 * (k - 1) as f64;
        (f, format!("f={f:.1}"))
    })
    .collect()
}

/// Ten labeled settings realizing H(f) = (sigma_z + f^2 sigma_x) / 2 at
/// f = 0, 0.2, ..., 1.8: the z component is constant while the x component
/// grows quadratically in the control.
pub fn quadratic_control_device() -> Result<DeviceModel> {
    let mut table = BTreeMap::new();
    for (f, label) in quadratic_control_settings() {
        let m = (sigma_z() + sigma_x() * num_complex::Complex64::new(f * f, 0.0))
            * num_complex::Complex64::new(0.5, 0.0);
        table.insert(label, HermitianOperator::new(m)?);
    }
    DeviceModel::new(
        ControlledHamiltonian::table(table)?,
        LindbladDissipator::empty(),
        Observable::sigma_z(),
        DensityMatrix::maximally_mixed(2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::axis_angles_from_hamiltonian;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ten_level_matrix_is_hermitian_with_known_corner() {
        let h = ten_level_hamiltonian();
        assert_eq!(h.dim(), 10);
        assert_abs_diff_eq!(h.entries()[(0, 0)].re, 1.3701, epsilon = 1e-12);
        assert_abs_diff_eq!(h.entries()[(9, 9)].re, 8.9032, epsilon = 1e-12);
        assert_abs_diff_eq!(h.entries()[(0, 1)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn qubit_device_axis_round_trips() {
        qubit_device(2.0086, 1.4780, 0.0).unwrap();
        let h = qubit_hamiltonian(1.2, 0.6, -0.9).unwrap();
        let axis = axis_angles_from_hamiltonian(&h).unwrap();
        assert_abs_diff_eq!(axis.omega, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(axis.theta, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(axis.phi, -0.9, epsilon = 1e-12);
    }

    #[test]
    fn control_family_spans_the_expected_settings() {
        let device = quadratic_control_device().unwrap();
        let settings = quadratic_control_settings();
        assert_eq!(settings.len(), 10);
        assert_eq!(settings[0].1, "f=0.0");
        assert_eq!(settings[9].1, "f=1.8");
        assert_abs_diff_eq!(settings[9].0, 1.8, epsilon = 1e-12);
        let h = device
            .hamiltonians()
            .resolve(&crate::operators::ControlSetting::Label("f=1.8".into()))
            .unwrap();
        assert_abs_diff_eq!(h.entries()[(0, 1)].re, 1.8 * 1.8 / 2.0, epsilon = 1e-12);
    }
}
