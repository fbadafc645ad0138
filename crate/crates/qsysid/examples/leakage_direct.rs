//! Measures how much population escapes the two lowest levels of the
//! 10-level test system, conditioned on starting inside them.

use qsysid::presets::ten_level_device;
use qsysid::protocols::{estimate_leakage_direct, TimeGrid};
use qsysid::subspace::projector_onto_basis;
use qsysid::{ControlSetting, ExpectationDevice};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let device = ten_level_device();
    let projector = projector_onto_basis(10, &[0, 1])?;
    let control = ControlSetting::Vector(Vec::new());
    let grid = TimeGrid::new(0.0, 0.01, 10_000)?;

    let report = estimate_leakage_direct(&device, &projector, &control, &grid, 100, 7)?;
    println!(
        "measured mean leakage {:.6} from {} conditioned shots ({} excluded)",
        report.mean_leak, report.conditioned_shots, report.excluded_shots
    );

    // The same protocol on exact expectation values, for comparison.
    let exact = ExpectationDevice::new(&device);
    let oracle = estimate_leakage_direct(&exact, &projector, &control, &grid, 1_000_000_000, 7)?;
    println!("noiseless mean leakage {:.7}", oracle.mean_leak);

    let peak = report
        .estimates
        .iter()
        .zip(grid.times())
        .max_by(|a, b| a.0.total_cmp(b.0))
        .map(|(p, t)| (t, *p))
        .expect("grid is nonempty");
    println!("largest single-time estimate {:.4} at t = {}", peak.1, peak.0);
    Ok(())
}
