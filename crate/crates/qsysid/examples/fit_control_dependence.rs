//! Sweeps a scalar control, identifies the rotation axis at each setting,
//! and fits competing models of how the axis depends on the control.

use qsysid::controlfit::{
    compare_models, fit_linear_model, fit_polynomial_component, Axis, ControlDataset, ModelSpec,
};
use qsysid::presets::{quadratic_control_device, quadratic_control_settings};
use qsysid::protocols::{identify_omega_theta, TimeGrid};
use qsysid::ControlSetting;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let device = quadratic_control_device()?;
    let grid = TimeGrid::new(0.0, 0.01, 2_000)?;

    let mut controls = Vec::new();
    let mut estimates = Vec::new();
    for (k, (f, label)) in quadratic_control_settings().into_iter().enumerate() {
        let setting = ControlSetting::Label(label.clone());
        let estimate = identify_omega_theta(&device, &setting, &grid, 100, 7 + k as u64)?;
        if estimate.omega_undetermined {
            println!("{label}: no precession, skipping");
            continue;
        }
        println!(
            "{label}: omega = {:.4}, theta = {:.4}",
            estimate.omega_hat, estimate.theta_hat
        );
        controls.push(vec![f]);
        estimates.push(estimate);
    }

    // Without a measured azimuth each axis sits in the x-z plane, flagged.
    let dataset = ControlDataset::from_estimates(&controls, &estimates)?;
    println!("{} rows, ambiguous flags {:?}", dataset.len(), dataset.ambiguous());

    let linear = fit_linear_model(&dataset)?;
    println!(
        "affine model: d(0) = {:?}, slope = {:?}, delta = {:.5}",
        linear.intercept, linear.slopes[0], linear.delta
    );

    let dz = fit_polynomial_component(&dataset, Axis::Z, 1)?;
    let dx = fit_polynomial_component(&dataset, Axis::X, 2)?;
    println!("d_z linear:    {:?}", dz.coefficients);
    println!("d_x quadratic: {:?}", dx.coefficients);

    let specs = [ModelSpec::Linear, ModelSpec::Polynomial(2), ModelSpec::Polynomial(3)];
    let comparison = compare_models(&dataset, &specs)?;
    for score in &comparison.ranked {
        println!(
            "  {}: delta = {:.5}, adjusted score = {:.3e}",
            score.spec, score.delta, score.adjusted_score
        );
    }
    println!("preferred: {}", comparison.best().spec);
    Ok(())
}
