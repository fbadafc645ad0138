//! Protocols run against a foreign Device implementation built from closed
//! forms, never touching the simulator: the trait is the whole contract.

mod common;

use std::f64::consts::PI;

use qsysid::device::{CountsTable, Device, ShotPlan};
use qsysid::error::{Error, Result};
use qsysid::operators::HermitianOperator;
use qsysid::protocols::{
    estimate_confinement_fourier, estimate_leakage_direct, identify_omega_theta, TimeGrid,
};
use qsysid::subspace::projector_onto_basis;
use qsysid::ControlSetting;

fn split_counts(shots: u64, p: f64) -> (u64, u64) {
    let hit = (p.clamp(0.0, 1.0) * shots as f64).round() as u64;
    (hit.min(shots), shots - hit.min(shots))
}

/// A two-outcome device answered from the closed form of z(t) for a fixed
/// axis, rounding expectations to whole counts. It owns no simulator state.
struct AnalyticQubit {
    omega: f64,
    theta: f64,
}

impl AnalyticQubit {
    fn z(&self, t: f64) -> f64 {
        self.theta.cos().powi(2) + self.theta.sin().powi(2) * (self.omega * t).cos()
    }
}

impl Device for AnalyticQubit {
    fn run_experiment_batch(&self, plan: &ShotPlan) -> Result<CountsTable> {
        if plan.prepare.is_some() {
            return Err(Error::InvalidPlan("this recorded device has no prepare data".into()));
        }
        let z = self.z(plan.evolve_time);
        let stay = (1.0 + z) / 2.0;
        let per_branch = plan.shots / 2;
        let (n00, n01) = split_counts(per_branch, stay);
        let (n11, n10) = split_counts(plan.shots - per_branch, stay);
        CountsTable::new(vec![1.0, -1.0], vec![n00, n01, n10, n11], false)
    }

    fn run_three_outcome_batch(
        &self,
        _subspace_projector: &HermitianOperator,
        _plan: &ShotPlan,
    ) -> Result<CountsTable> {
        Err(Error::InvalidPlan("two-outcome protocols must not ask for a coarse detector".into()))
    }
}

/// A three-outcome device for a ternary system prepared in its first basis
/// state, with recorded transfer and leak probabilities.
struct RecordedTernary;

impl RecordedTernary {
    fn leak(t: f64) -> f64 {
        0.002 * (1.0 - (0.7 * t).cos())
    }

    fn transfer(t: f64) -> f64 {
        0.15 * (1.0 - (1.1 * t).cos())
    }
}

impl Device for RecordedTernary {
    fn run_experiment_batch(&self, _plan: &ShotPlan) -> Result<CountsTable> {
        Err(Error::InvalidPlan("leakage estimation must use the coarse detector".into()))
    }

    fn run_three_outcome_batch(
        &self,
        subspace_projector: &HermitianOperator,
        plan: &ShotPlan,
    ) -> Result<CountsTable> {
        let trace = subspace_projector.trace();
        if (trace - 2.0).abs() > 1e-9 {
            return Err(Error::InvalidPlan(format!(
                "recorded data covers a rank-2 subspace, projector has rank {trace}"
            )));
        }
        let t = plan.evolve_time;
        let leak = Self::leak(t);
        let transfer = Self::transfer(t);
        let (n_leak, kept) = split_counts(plan.shots, leak);
        let (n_transfer, n_stay) = split_counts(kept, transfer / (1.0 - leak));
        let mut counts = vec![0u64; 9];
        counts[0] = n_stay;
        counts[1] = n_transfer;
        counts[2] = n_leak;
        CountsTable::new(vec![0.0, 1.0, 2.0], counts, true)
    }
}

#[test]
fn axis_identification_needs_only_the_trait() {
    let device = AnalyticQubit { omega: 1.83, theta: 1.2 };
    let control = ControlSetting::Vector(Vec::new());
    let grid = TimeGrid::new(0.0, 0.017, 2200).expect("grid");
    let estimate = identify_omega_theta(&device, &control, &grid, 1_000_000_000, 42)
        .expect("estimate");
    assert!((estimate.omega_hat - 1.83).abs() < 1e-5, "omega {}", estimate.omega_hat);
    assert!((estimate.theta_hat - 1.2).abs() < 1e-5, "theta {}", estimate.theta_hat);
}

#[test]
fn confinement_certificate_needs_only_the_trait() {
    let device = AnalyticQubit { omega: 1.83, theta: 1.2 };
    let control = ControlSetting::Vector(Vec::new());
    let grid = TimeGrid::commensurate(1.83, 9, 900).expect("grid");
    let report = estimate_confinement_fourier(&device, &control, &grid, 1_000_000_000, 7)
        .expect("report");
    let expected_h0 = (1.0 + (1.2f64).cos().powi(2)) / 2.0;
    assert!((report.h0 - expected_h0).abs() < 1e-5, "h0 {} vs {expected_h0}", report.h0);
    assert!(
        (report.spectral_sum - 1.0).abs() < 1e-5,
        "a closed qubit must carry full spectral weight, got {}",
        report.spectral_sum
    );
    assert!((report.peak_omega - 1.83).abs() < 1e-9, "peak {}", report.peak_omega);
    assert!(report.bounds.upper < 1e-4, "upper bound {}", report.bounds.upper);
}

#[test]
fn leakage_estimation_needs_only_the_trait() {
    let device = RecordedTernary;
    let control = ControlSetting::Vector(Vec::new());
    let grid = TimeGrid::new(0.0, 0.05, 400).expect("grid");
    let projector = projector_onto_basis(3, &[0, 1]).expect("projector");
    let shots = 100_000;
    let report = estimate_leakage_direct(&device, &projector, &control, &grid, shots, 3)
        .expect("report");
    let exact: f64 = grid.times().iter().map(|&t| RecordedTernary::leak(t)).sum::<f64>()
        / grid.len() as f64;
    assert!(
        (report.mean_leak - exact).abs() < 1e-5,
        "mean leak {} vs closed form {exact}",
        report.mean_leak
    );
    assert_eq!(report.excluded_shots, 0, "every shot starts inside the subspace");
    assert_eq!(report.conditioned_shots, shots * grid.len() as u64);
    assert_eq!(report.estimates.len(), grid.len());
}

#[test]
fn foreign_tables_reject_malformed_shapes() {
    assert!(CountsTable::new(vec![], vec![], false).is_err());
    assert!(CountsTable::new(vec![1.0, -1.0], vec![1, 2, 3], false).is_err());
    let table = CountsTable::new(vec![1.0, -1.0], vec![3, 1, 0, 4], false).expect("table");
    assert_eq!(table.total(), 8);
    assert_eq!(table.count(1, 1), 4);
    assert_eq!(table.first_outcome_total(0), 4);
    assert_eq!(table.second_outcome_total(0), 3);
}

#[test]
fn wrong_subspace_rank_is_refused_by_the_recorded_device() {
    let device = RecordedTernary;
    let control = ControlSetting::Vector(Vec::new());
    let grid = TimeGrid::new(0.0, 0.05, 50).expect("grid");
    let projector = projector_onto_basis(3, &[0]).expect("projector");
    assert!(estimate_leakage_direct(&device, &projector, &control, &grid, 1000, 3).is_err());
}

#[test]
fn commensurate_grid_span_matches_whole_cycles() {
    let omega = 1.83;
    let grid = TimeGrid::commensurate(omega, 9, 900).expect("grid");
    let span = grid.dt * grid.len() as f64;
    let cycles = span * omega / (2.0 * PI);
    assert!((cycles - 9.0).abs() < 1e-12, "span covers {cycles} cycles");
}
