//! Certifies confinement of the 10-level test system to a two-dimensional
//! subspace using only a detector that answers "still in |0>?".

use qsysid::presets::ten_level_zero_detector_device;
use qsysid::protocols::{estimate_confinement_fourier, TimeGrid};
use qsysid::ControlSetting;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let device = ten_level_zero_detector_device();
    let control = ControlSetting::Vector(Vec::new());
    // 10000 samples spanning t in [0, 100).
    let grid = TimeGrid::new(0.0, 0.01, 9_999)?;

    let report = estimate_confinement_fourier(&device, &control, &grid, 100, 7)?;
    println!("h0 = {:.5}", report.h0);
    println!("h1 = {:.5} at omega = {:.5}", report.h1, report.peak_omega);
    println!("spectral sum h0 + 2 h1 = {:.5}", report.spectral_sum);
    println!(
        "leakage epsilon bounded to [{:.6}, {:.6}]",
        report.bounds.lower, report.bounds.upper
    );
    println!("{}", report.note);

    // The lines next to the peak are already down in the noise.
    let m = (report.peak_omega / report.spectrum.resolution()).round() as usize;
    for bin in m.saturating_sub(2)..=m + 2 {
        let coeff = report.spectrum.coeffs()[bin];
        println!(
            "  bin {bin}: omega = {:.4}, |c| = {:.6}",
            report.spectrum.freqs()[bin],
            coeff.norm()
        );
    }
    Ok(())
}
