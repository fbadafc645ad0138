//! Estimates a dephasing rate from the width of the spectral line, then
//! shows the flip-statistics test that separates dephasing from relaxation.

use qsysid::presets::{dephasing_qubit, dephasing_qubit_z, relaxation_qubit_z};
use qsysid::protocols::{
    discriminate_dephasing_relaxation, estimate_decoherence, TimeGrid,
};
use qsysid::ControlSetting;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let control = ControlSetting::Vector(Vec::new());

    // Dissipation along the rotation axis damps the oscillation envelope at
    // Gamma = gamma / 2 and broadens the line by the same amount.
    let (omega0, gamma) = (2.0, 0.2);
    let device = dephasing_qubit(omega0, gamma)?;
    let grid = TimeGrid::new(0.0, 0.1, 800)?;
    let report = estimate_decoherence(&device, &control, &grid, 200, 7)?;
    println!("line width: {}", report.classification);
    println!(
        "  Gamma = {:.4} (true {:.4}), omega0 = {:.4} (true {omega0:.4})",
        report.gamma_hat.unwrap_or(f64::NAN),
        gamma / 2.0,
        report.omega0_hat.unwrap_or(f64::NAN),
    );

    // Repeated measurements along the dephasing axis never flip; relaxation
    // flips them at a rate the dwell times resolve.
    let dwell = [0.5, 1.0, 2.0, 3.0, 4.5, 6.0];
    let dephasing = dephasing_qubit_z(2.0, 0.1)?;
    let verdict = discriminate_dephasing_relaxation(&dephasing, &control, &dwell, 800, 7)?;
    println!("dephasing device:  {} ({})", verdict.classification, verdict.note);

    let relaxing = relaxation_qubit_z(2.0, 0.05)?;
    let verdict = discriminate_dephasing_relaxation(&relaxing, &control, &dwell, 4_000, 7)?;
    println!("relaxation device: {}", verdict.classification);
    if let Some(gamma_hat) = verdict.gamma_hat {
        println!("  flip rate gamma = {gamma_hat:.4} (true 0.05)");
    }
    if let Some(stats) = &verdict.flip_statistics {
        for (t, q) in stats.dwell_times.iter().zip(&stats.combined) {
            println!("  dwell {t:.1}: flip fraction {q:.4}");
        }
    }
    Ok(())
}
