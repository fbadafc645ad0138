//! End-to-end protocol behavior on randomized device instances: axis
//! identification, azimuth recovery, and decoherence classification.

mod common;

use std::f64::consts::PI;

use qsysid::presets::{
    dephasing_qubit, dephasing_qubit_z, qubit_device, relaxation_qubit_z,
    two_setting_qubit_device, REFERENCE_CONTROL, TARGET_CONTROL,
};
use qsysid::protocols::{
    discriminate_dephasing_relaxation, estimate_decoherence, identify_omega_theta, identify_phi,
    prepare_equatorial, DecoherenceClass, TimeGrid,
};
use qsysid::{ControlSetting, ExpectationDevice};
use rand::Rng;

const EXACT_SHOTS: u64 = 1_000_000_000;

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[test]
fn noiseless_axis_recovery_on_random_qubits() {
    let mut rng = common::rng(0xa71e);
    let control = ControlSetting::Vector(Vec::new());
    for case in 0..30 {
        let omega = rng.gen_range(0.6..3.0);
        let theta = rng.gen_range(0.25..PI / 2.0 - 0.05);
        let phi = rng.gen_range(-PI..PI);
        let model = qubit_device(omega, theta, phi).expect("device");
        let device = ExpectationDevice::new(&model);
        let dt = 12.0 * 2.0 * PI / (omega * 1200.0) * 1.037;
        let grid = TimeGrid::new(0.0, dt, 1200).expect("grid");
        let estimate =
            identify_omega_theta(&device, &control, &grid, EXACT_SHOTS, 1).expect("estimate");
        assert!(!estimate.omega_undetermined, "case {case}");
        assert!(
            (estimate.omega_hat - omega).abs() < 1e-3,
            "case {case}: omega {} vs {omega}",
            estimate.omega_hat
        );
        assert!(
            (estimate.theta_hat - theta).abs() < 1e-3,
            "case {case}: theta {} vs {theta}",
            estimate.theta_hat
        );
        assert!(estimate.phi_hat.is_none(), "z alone cannot orient the azimuth");
    }
}

#[test]
fn noisy_axis_recovery_lands_within_tolerance_for_most_seeds() {
    let (omega, theta) = (2.0086, 1.4780);
    let model = qubit_device(omega, theta, 0.6).expect("device");
    let control = ControlSetting::Vector(Vec::new());
    let grid = TimeGrid::new(0.0, 0.01, 2000).expect("grid");
    let mut hits = 0;
    for seed in 0..10 {
        let estimate =
            identify_omega_theta(&model, &control, &grid, 100, seed).expect("estimate");
        if (estimate.omega_hat - omega).abs() < 0.02 && (estimate.theta_hat - theta).abs() < 0.03 {
            hits += 1;
        }
    }
    assert!(hits >= 6, "only {hits}/10 seeds landed inside the tolerance window");
}

#[test]
fn azimuth_recovery_sweeps_the_circle() {
    let (omega_ref, theta_ref) = (1.0, 3.0 * PI / 8.0);
    let targets = [(0.8, PI / 6.0), (1.3, 1.0), (1.1, 0.7)];
    for k in 0..12 {
        let phi = -PI + (k as f64 + 0.5) * PI / 6.0;
        let (omega_f, theta_f) = targets[k % targets.len()];
        let model = two_setting_qubit_device(omega_ref, theta_ref, (omega_f, theta_f, phi))
            .expect("device");
        let device = ExpectationDevice::new(&model);
        let frame = prepare_equatorial(
            ControlSetting::Label(REFERENCE_CONTROL.into()),
            omega_ref,
            theta_ref,
        )
        .expect("frame");
        let grid = TimeGrid::commensurate(omega_f, 8, 512).expect("grid");
        let estimate = identify_phi(
            &device,
            &ControlSetting::Label(TARGET_CONTROL.into()),
            &frame,
            omega_f,
            theta_f,
            &grid,
            EXACT_SHOTS,
            3,
        )
        .expect("estimate");
        let phi_hat = estimate.phi_hat.expect("resolved azimuth");
        let err = angular_distance(phi_hat, phi);
        assert!(err < 1e-4, "phi {phi:.4}: estimate {phi_hat:.6} off by {err:.2e}");
    }
}

#[test]
fn azimuth_recovery_survives_the_reference_boundary_angle() {
    let (omega_ref, theta_ref) = (1.0, PI / 4.0);
    let (omega_f, theta_f, phi) = (1.2, PI / 6.0, PI / 4.0);
    let model =
        two_setting_qubit_device(omega_ref, theta_ref, (omega_f, theta_f, phi)).expect("device");
    let device = ExpectationDevice::new(&model);
    let frame = prepare_equatorial(
        ControlSetting::Label(REFERENCE_CONTROL.into()),
        omega_ref,
        theta_ref,
    )
    .expect("frame");
    assert!((frame.alpha0 - PI).abs() < 1e-12, "tilt saturates at a half turn");
    assert!(frame.beta.abs() < 1e-12, "the boundary frame has zero azimuth offset");
    let grid = TimeGrid::commensurate(omega_f, 8, 512).expect("grid");
    let estimate = identify_phi(
        &device,
        &ControlSetting::Label(TARGET_CONTROL.into()),
        &frame,
        omega_f,
        theta_f,
        &grid,
        EXACT_SHOTS,
        5,
    )
    .expect("estimate");
    let phi_hat = estimate.phi_hat.expect("resolved azimuth");
    assert!(angular_distance(phi_hat, phi) < 1e-3, "phi {phi_hat} vs {phi}");
}

#[test]
fn noisy_azimuth_recovery_lands_within_tolerance_for_most_seeds() {
    let (omega_ref, theta_ref) = (1.0, PI / 4.0);
    let (omega_f, theta_f, phi) = (1.2, PI / 6.0, PI / 4.0);
    let model =
        two_setting_qubit_device(omega_ref, theta_ref, (omega_f, theta_f, phi)).expect("device");
    let frame = prepare_equatorial(
        ControlSetting::Label(REFERENCE_CONTROL.into()),
        omega_ref,
        theta_ref,
    )
    .expect("frame");
    let grid = TimeGrid::commensurate(omega_f, 8, 512).expect("grid");
    let mut hits = 0;
    for seed in 0..10 {
        let estimate = identify_phi(
            &model,
            &ControlSetting::Label(TARGET_CONTROL.into()),
            &frame,
            omega_f,
            theta_f,
            &grid,
            100,
            seed,
        )
        .expect("estimate");
        let best = estimate
            .phi_hat
            .into_iter()
            .chain(estimate.phi_candidates.iter().copied())
            .map(|p| angular_distance(p, phi))
            .fold(f64::INFINITY, f64::min);
        if best < 0.02 * PI {
            hits += 1;
        }
    }
    assert!(hits >= 6, "only {hits}/10 seeds recovered the azimuth");
}

#[test]
fn line_width_tracks_the_dephasing_rate() {
    let control = ControlSetting::Vector(Vec::new());
    for gamma in [0.2, 0.4] {
        let model = dephasing_qubit(2.0, gamma).expect("device");
        let device = ExpectationDevice::new(&model);
        let grid = TimeGrid::new(0.0, 0.1, 800).expect("grid");
        let report =
            estimate_decoherence(&device, &control, &grid, EXACT_SHOTS, 11).expect("report");
        assert_eq!(report.classification, DecoherenceClass::PureDephasing);
        let width = gamma / 2.0;
        let gamma_hat = report.gamma_hat.expect("width");
        let omega0_hat = report.omega0_hat.expect("center");
        assert!(
            (gamma_hat - width).abs() < 0.05 * width,
            "width {gamma_hat} vs {width}"
        );
        assert!((omega0_hat - 2.0).abs() < 0.02, "center {omega0_hat}");
    }
}

#[test]
fn closed_qubit_line_width_is_reported_as_unresolved() {
    let control = ControlSetting::Vector(Vec::new());
    let model = qubit_device(2.0, PI / 2.0, 0.0).expect("device");
    let device = ExpectationDevice::new(&model);
    let grid = TimeGrid::new(0.0, 0.1, 800).expect("grid");
    let report = estimate_decoherence(&device, &control, &grid, EXACT_SHOTS, 13).expect("report");
    assert_eq!(report.classification, DecoherenceClass::Undetermined);
    assert!(report.note.contains("consistent with zero"), "note: {}", report.note);
}

#[test]
fn repeated_measurements_separate_dephasing_from_relaxation() {
    let control = ControlSetting::Vector(Vec::new());
    let dwell = [0.5, 1.0, 2.0, 3.0, 4.5, 6.0];

    let dephasing = dephasing_qubit_z(2.0, 0.1).expect("device");
    let report = discriminate_dephasing_relaxation(&dephasing, &control, &dwell, 800, 17)
        .expect("report");
    assert_eq!(report.classification, DecoherenceClass::PureDephasing);
    assert!(report.gamma_hat.is_none(), "populations never move, so no rate is observable");

    let relaxing = relaxation_qubit_z(2.0, 0.05).expect("device");
    let report = discriminate_dephasing_relaxation(&relaxing, &control, &dwell, 4000, 19)
        .expect("report");
    assert_ne!(report.classification, DecoherenceClass::PureDephasing);
    let stats = report.flip_statistics.expect("flip statistics");
    assert!(stats.max_combined > stats.threshold);
    let last = *stats.combined.last().expect("nonempty");
    let first = stats.combined[0];
    assert!(last > first, "flip fraction must grow with dwell time");
}

#[test]
fn flip_fractions_follow_the_relaxation_curve() {
    let control = ControlSetting::Vector(Vec::new());
    let rate = 0.05;
    let dwell = [0.5, 1.0, 2.0, 3.0, 4.5, 6.0];
    let relaxing = relaxation_qubit_z(2.0, rate).expect("device");
    let device = ExpectationDevice::new(&relaxing);
    let report = discriminate_dephasing_relaxation(&device, &control, &dwell, EXACT_SHOTS, 23)
        .expect("report");
    let stats = report.flip_statistics.expect("flip statistics");
    for (&t, &combined) in dwell.iter().zip(&stats.combined) {
        let expected = 0.5 * (1.0 - (-2.0 * rate * t).exp());
        assert!(
            (combined - expected).abs() < 1e-6,
            "dwell {t}: flip fraction {combined} vs {expected}"
        );
    }
}

#[test]
fn randomized_axis_recovery_with_modest_shots() {
    let mut rng = common::rng(0xbeef);
    let control = ControlSetting::Vector(Vec::new());
    let mut hits = 0;
    let total = 20;
    for case in 0..total {
        let omega = rng.gen_range(1.0..2.6);
        let theta = rng.gen_range(0.5..PI / 2.0 - 0.1);
        let model = qubit_device(omega, theta, 0.0).expect("device");
        let dt = 13.0 * 2.0 * PI / (omega * 1400.0);
        let grid = TimeGrid::new(0.0, dt * 1.021, 1400).expect("grid");
        let estimate =
            identify_omega_theta(&model, &control, &grid, 200, 100 + case).expect("estimate");
        if (estimate.omega_hat - omega).abs() < 0.02 && (estimate.theta_hat - theta).abs() < 0.05 {
            hits += 1;
        }
    }
    assert!(hits >= total * 8 / 10, "only {hits}/{total} noisy recoveries landed");
}
