//! Identification procedures that talk to a device only through counts
//! tables: subspace confinement, rotation rate and polar angle, azimuth via a
//! prepared equatorial state, and decoherence classification and rates.

use rayon::prelude::*;
use serde::Serialize;

use crate::device::{derive_stream_seed, estimate_z, CountsTable, Device, PrepareStep, ShotPlan};
use crate::error::{Error, Result};
use crate::operators::ControlSetting;
use crate::qubit::{wrap_angle, AxisAngles, BlochVector};
use crate::spectral::{
    confinement_bounds, dft, fit_lorentzian, refined_peak_frequency, solve_damped_3x3,
    ConfinementBounds, LorentzianFit, SampledTrace, Spectrum,
};

/// Combined flip fraction below which a device is classed as pure dephasing.
pub const FLIP_THRESHOLD: f64 = 0.05;

/// Uniform time grid t_k = t0 + k dt for k = 0..=steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !t0.is_finite() || t0 < 0.0 {
            return Err(Error::InvalidGrid(format!("start time {t0} must be finite and >= 0")));
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidGrid(format!("step {dt} must be finite and positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("grid needs at least one step".into()));
        }
        Ok(Self { t0, dt, steps })
    }

    /// Grid whose span covers `cycles` whole periods of `omega` with exactly
    /// `samples` points, so that frequency's spectral line falls on a bin.
    pub fn commensurate(omega: f64, cycles: usize, samples: usize) -> Result<Self> {
        if !omega.is_finite() || omega <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "cannot build a grid commensurate with frequency {omega}"
            )));
        }
        if cycles == 0 || samples < 2 {
            return Err(Error::InvalidGrid(
                "commensurate grid needs at least one cycle and two samples".into(),
            ));
        }
        let span = cycles as f64 * 2.0 * std::f64::consts::PI / omega;
        Self::new(0.0, span / samples as f64, samples - 1)
    }

    /// Number of grid points, steps + 1.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }
}

/// One measured point of a conditioned trace.
struct TracePoint {
    value: f64,
    conditioned: u64,
}

/// Runs one batch per grid point (in parallel, with a per-point seed stream)
/// and reduces each counts table to a z estimate normalized to [-1, 1].
fn measure_z_trace(
    device: &dyn Device,
    control: &ControlSetting,
    prepare: Option<&PrepareStep>,
    grid: &TimeGrid,
    shots_per_point: u64,
    seed: u64,
    symmetrize: bool,
) -> Result<SampledTrace> {
    let points: Vec<TracePoint> = (0..grid.len())
        .into_par_iter()
        .map(|k| -> Result<TracePoint> {
            let mut plan = ShotPlan::new(
                control.clone(),
                grid.time(k),
                shots_per_point,
                derive_stream_seed(seed, k as u64),
            )?;
            if let Some(step) = prepare {
                plan = plan.with_prepare(step.clone());
            }
            let counts = device.run_experiment_batch(&plan)?;
            let scale = outcome_scale(&counts)?;
            let estimate = estimate_z(&counts, symmetrize)?;
            Ok(TracePoint { value: estimate.z_hat / scale, conditioned: estimate.conditioned_shots })
        })
        .collect::<Result<_>>()?;
    let values = points.iter().map(|p| p.value).collect();
    let shots = points.iter().map(|p| p.conditioned).collect();
    SampledTrace::new(grid.t0, grid.dt, values)?.with_shots(shots)
}

/// The common +v/-v outcome scale of a two-outcome table.
fn outcome_scale(counts: &CountsTable) -> Result<f64> {
    if counts.complement_lumped() || counts.n_outcomes() != 2 {
        return Err(Error::OutcomeValuesUnsuitable);
    }
    let v = counts.values()[0];
    if !(v > 0.0) || (counts.values()[1] + v).abs() > 1e-9 * v {
        return Err(Error::OutcomeValuesUnsuitable);
    }
    Ok(v)
}

/// Mean leakage out of a subspace, estimated from conditioned repeated
/// measurements at every grid point.
#[derive(Clone, Debug, Serialize)]
pub struct LeakageReport {
    pub grid: TimeGrid,
    pub shots_per_point: u64,
    /// Average of the per-point leak estimates over the grid.
    pub mean_leak: f64,
    /// Shots whose first measurement landed inside the subspace.
    pub conditioned_shots: u64,
    /// Shots discarded because the first measurement landed outside.
    pub excluded_shots: u64,
    #[serde(skip)]
    pub estimates: Vec<f64>,
    #[serde(skip)]
    pub conditioned_per_point: Vec<u64>,
}

/// Estimates the leak probability at each grid time by conditioning on a
/// first measurement inside the subspace and counting how often the second
/// lands outside, then averages over the grid.
pub fn estimate_leakage_direct(
    device: &dyn Device,
    subspace_projector: &crate::operators::HermitianOperator,
    control: &ControlSetting,
    grid: &TimeGrid,
    shots_per_point: u64,
    seed: u64,
) -> Result<LeakageReport> {
    let points: Vec<TracePoint> = (0..grid.len())
        .into_par_iter()
        .map(|k| -> Result<TracePoint> {
            let plan = ShotPlan::new(
                control.clone(),
                grid.time(k),
                shots_per_point,
                derive_stream_seed(seed, k as u64),
            )?;
            let counts = device.run_three_outcome_batch(subspace_projector, &plan)?;
            let outside = counts.n_outcomes() - 1;
            let leaked: u64 = (0..outside).map(|a| counts.count(a, outside)).sum();
            let kept = counts.total() - counts.first_outcome_total(outside);
            if kept == 0 {
                return Err(Error::NoConditionedShots(format!(
                    "every shot at t = {} started outside the subspace",
                    grid.time(k)
                )));
            }
            Ok(TracePoint { value: leaked as f64 / kept as f64, conditioned: kept })
        })
        .collect::<Result<_>>()?;
    let estimates: Vec<f64> = points.iter().map(|p| p.value).collect();
    let conditioned_per_point: Vec<u64> = points.iter().map(|p| p.conditioned).collect();
    let conditioned: u64 = conditioned_per_point.iter().sum();
    let total = shots_per_point * grid.len() as u64;
    Ok(LeakageReport {
        grid: *grid,
        shots_per_point,
        mean_leak: estimates.iter().sum::<f64>() / estimates.len() as f64,
        conditioned_shots: conditioned,
        excluded_shots: total.saturating_sub(conditioned),
        estimates,
        conditioned_per_point,
    })
}

/// Confinement certificate from the spectrum of a return-probability trace.
#[derive(Clone, Debug, Serialize)]
pub struct ConfinementReport {
    pub grid: TimeGrid,
    pub shots_per_point: u64,
    /// Zero-frequency coefficient of the p0 trace.
    pub h0: f64,
    /// Magnitude of the dominant positive-frequency coefficient.
    pub h1: f64,
    /// h0 + 2 h1; values near 1 certify confinement.
    pub spectral_sum: f64,
    /// Location of the dominant line, an estimate of the rotation rate.
    pub peak_omega: f64,
    pub bounds: ConfinementBounds,
    pub note: String,
    #[serde(skip)]
    pub trace: SampledTrace,
    #[serde(skip)]
    pub spectrum: Spectrum,
}

/// Certifies two-level confinement from return-probability statistics alone:
/// measures p0(t) over the grid, reads h0 and the first-harmonic height off
/// its spectrum, and converts them into leakage bounds.
pub fn estimate_confinement_fourier(
    device: &dyn Device,
    control: &ControlSetting,
    grid: &TimeGrid,
    shots_per_point: u64,
    seed: u64,
) -> Result<ConfinementReport> {
    let z_trace = measure_z_trace(device, control, None, grid, shots_per_point, seed, false)?;
    let p0: Vec<f64> = z_trace.values().iter().map(|z| (1.0 + z) / 2.0).collect();
    let shots = z_trace.shots().expect("trace built with shots").to_vec();
    let trace = SampledTrace::new(grid.t0, grid.dt, p0)?.with_shots(shots)?;
    let spectrum = dft(&trace)?;
    let peak = spectrum.peak().ok_or(Error::NoPeak)?;
    let h0 = spectrum.h0();
    let h1 = peak.coeff.norm();
    let bounds = confinement_bounds(h0, h1)?;
    Ok(ConfinementReport {
        grid: *grid,
        shots_per_point,
        h0,
        h1,
        spectral_sum: h0 + 2.0 * h1,
        peak_omega: peak.omega,
        bounds,
        note: "bounds certify confinement to the best-aligned plane, \
               not to a particular pair of basis states"
            .into(),
        trace,
        spectrum,
    })
}

/// Quality measures of the fitted oscillation behind an omega/theta estimate.
#[derive(Clone, Debug, Serialize)]
pub struct OscillationDiagnostics {
    /// Fitted constant term of z(t) = offset + amplitude cos(omega t).
    pub fit_offset: f64,
    /// Fitted cosine amplitude; equals sin^2(theta) for a clean qubit.
    pub fit_amplitude: f64,
    /// Zero-frequency coefficient of the measured trace.
    pub h0: f64,
    /// |offset + amplitude - 1|; nonzero means the trace is not of the
    /// assumed two-level form.
    pub model_defect: f64,
    pub residual_rms: f64,
    pub sigma_omega: Option<f64>,
    pub sigma_theta: Option<f64>,
}

/// Quality measures of an azimuth estimate.
#[derive(Clone, Debug, Serialize)]
pub struct AzimuthDiagnostics {
    /// Zero-frequency coefficient, an estimate of sin(theta)cos(theta)cos(phi - beta).
    pub c_hat: f64,
    /// Quadrature amplitude, an estimate of -sin(theta)sin(phi - beta).
    pub d_hat: f64,
    pub sigma_c: f64,
    pub sigma_d: f64,
    /// Azimuth of the prepared equatorial state.
    pub beta: f64,
    /// |phi - beta| recovered from the in-phase component.
    pub branch_angle: f64,
    /// Whether the quadrature sign was significant enough to pick a branch.
    pub resolved_by_sign: bool,
    /// Distance of the target line from the nearest spectral bin, in bins.
    pub commensuration_defect: f64,
    /// Gap between the quadrature magnitude and the in-phase prediction.
    pub consistency_gap: f64,
}

/// Recovered rotation-axis parameters for one control setting.
#[derive(Clone, Debug, Serialize)]
pub struct HamiltonianEstimate {
    pub control: ControlSetting,
    pub omega_hat: f64,
    /// Polar angle folded into [0, pi/2].
    pub theta_hat: f64,
    pub phi_hat: Option<f64>,
    /// Both azimuth branches when the quadrature sign could not pick one.
    pub phi_candidates: Vec<f64>,
    /// Set when the trace showed no oscillation, leaving omega meaningless.
    pub omega_undetermined: bool,
    pub grid: TimeGrid,
    pub shots_per_point: u64,
    pub oscillation: Option<OscillationDiagnostics>,
    pub azimuth: Option<AzimuthDiagnostics>,
    #[serde(skip)]
    pub trace: Option<SampledTrace>,
    #[serde(skip)]
    pub spectrum: Option<Spectrum>,
}

/// Recovers the rotation rate and polar angle of a qubit's axis from the
/// oscillation of z(t): a spectral peak seeds a least-squares fit of
/// offset + amplitude cos(omega t), and theta = arcsin(sqrt(amplitude)).
pub fn identify_omega_theta(
    device: &dyn Device,
    control: &ControlSetting,
    grid: &TimeGrid,
    shots_per_point: u64,
    seed: u64,
) -> Result<HamiltonianEstimate> {
    let trace = measure_z_trace(device, control, None, grid, shots_per_point, seed, true)?;
    let spectrum = dft(&trace)?;
    let h0 = spectrum.h0();
    let omega_start = match refined_peak_frequency(&trace) {
        Ok(omega) => omega,
        Err(Error::NoPeak) => {
            let n = trace.len() as f64;
            let rms = (trace.values().iter().map(|v| (v - h0).powi(2)).sum::<f64>() / n).sqrt();
            return Ok(HamiltonianEstimate {
                control: control.clone(),
                omega_hat: 0.0,
                theta_hat: 0.0,
                phi_hat: None,
                phi_candidates: Vec::new(),
                omega_undetermined: true,
                grid: *grid,
                shots_per_point,
                oscillation: Some(OscillationDiagnostics {
                    fit_offset: h0,
                    fit_amplitude: 0.0,
                    h0,
                    model_defect: (h0 - 1.0).abs(),
                    residual_rms: rms,
                    sigma_omega: None,
                    sigma_theta: None,
                }),
                azimuth: None,
                trace: Some(trace),
                spectrum: Some(spectrum),
            });
        }
        Err(e) => return Err(e),
    };
    let amplitude_start = spectrum
        .peak()
        .map(|p| (2.0 * p.coeff.norm()).clamp(1e-6, 1.5))
        .unwrap_or(0.5);
    let fit = fit_offset_cosine(&trace, h0, amplitude_start, omega_start)?;
    let amplitude = fit.amplitude.clamp(0.0, 1.0);
    let theta_hat = amplitude.sqrt().asin();
    let sigma_theta = fit.sigma.map(|s| {
        let b = fit.amplitude.clamp(1e-9, 1.0 - 1e-9);
        s[1] / (2.0 * (b * (1.0 - b)).sqrt())
    });
    Ok(HamiltonianEstimate {
        control: control.clone(),
        omega_hat: fit.omega.abs(),
        theta_hat,
        phi_hat: None,
        phi_candidates: Vec::new(),
        omega_undetermined: false,
        grid: *grid,
        shots_per_point,
        oscillation: Some(OscillationDiagnostics {
            fit_offset: fit.offset,
            fit_amplitude: fit.amplitude,
            h0,
            model_defect: (fit.offset + fit.amplitude - 1.0).abs(),
            residual_rms: (fit.residual_sum_sq / trace.len() as f64).sqrt(),
            sigma_omega: fit.sigma.map(|s| s[2]),
            sigma_theta,
        }),
        azimuth: None,
        trace: Some(trace),
        spectrum: Some(spectrum),
    })
}

struct CosineFit {
    offset: f64,
    amplitude: f64,
    omega: f64,
    residual_sum_sq: f64,
    /// Standard errors of (offset, amplitude, omega) when estimable.
    sigma: Option<[f64; 3]>,
}

fn cosine_residual_sum(trace: &SampledTrace, p: &[f64; 3]) -> f64 {
    trace
        .times()
        .zip(trace.values())
        .map(|(t, &z)| {
            let r = p[0] + p[1] * (p[2] * t).cos() - z;
            r * r
        })
        .sum()
}

/// Least squares for z(t) = a + b cos(w t) by damped Gauss-Newton steps.
fn fit_offset_cosine(
    trace: &SampledTrace,
    offset0: f64,
    amplitude0: f64,
    omega0: f64,
) -> Result<CosineFit> {
    let mut p = [offset0, amplitude0, omega0];
    let mut rss = cosine_residual_sum(trace, &p);
    let mut damping = 1e-3;
    let mut converged = false;
    for _ in 0..200 {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (t, &z) in trace.times().zip(trace.values()) {
            let (s, c) = (p[2] * t).sin_cos();
            let r = p[0] + p[1] * c - z;
            let j = [1.0, c, -p[1] * t * s];
            for i in 0..3 {
                jtr[i] += j[i] * r;
                for l in 0..3 {
                    jtj[i][l] += j[i] * j[l];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..40 {
            let Some(step) = solve_damped_3x3(&jtj, &jtr, damping) else {
                damping *= 10.0;
                continue;
            };
            let candidate = [p[0] - step[0], p[1] - step[1], p[2] - step[2]];
            let candidate_rss = cosine_residual_sum(trace, &candidate);
            if candidate_rss.is_finite() && candidate_rss <= rss {
                let small = step
                    .iter()
                    .zip(&p)
                    .all(|(d, v)| d.abs() <= 1e-11 * v.abs().max(1e-3));
                p = candidate;
                rss = candidate_rss;
                damping = (damping * 0.3).max(1e-15);
                accepted = true;
                if small {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
            if damping > 1e12 {
                break;
            }
        }
        if converged {
            break;
        }
        if !accepted {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FitDidNotConverge { iterations: 200, residual: rss });
    }
    let mut jtj = [[0.0f64; 3]; 3];
    for t in trace.times() {
        let (s, c) = (p[2] * t).sin_cos();
        let j = [1.0, c, -p[1] * t * s];
        for i in 0..3 {
            for l in 0..3 {
                jtj[i][l] += j[i] * j[l];
            }
        }
    }
    let n = trace.len();
    let sigma = if n > 3 {
        invert_3x3(&jtj).map(|inv| {
            let s2 = rss / (n - 3) as f64;
            [
                (inv[0][0] * s2).max(0.0).sqrt(),
                (inv[1][1] * s2).max(0.0).sqrt(),
                (inv[2][2] * s2).max(0.0).sqrt(),
            ]
        })
    } else {
        None
    };
    Ok(CosineFit { offset: p[0], amplitude: p[1], omega: p[2], residual_sum_sq: rss, sigma })
}

fn invert_3x3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !det.is_finite() || det.abs() < 1e-300 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut inv = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let (c, d) = ((j + 1) % 3, (j + 2) % 3);
            inv[j][i] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) * inv_det;
        }
    }
    Some(inv)
}

/// A reference rotation that parks the measurement-axis state on the equator.
#[derive(Clone, Debug, Serialize)]
pub struct PreparedFrame {
    pub reference_control: ControlSetting,
    pub omega_ref: f64,
    pub theta_ref: f64,
    /// Rotation angle about the reference axis that lands on the equator.
    pub alpha0: f64,
    /// Azimuth of the landed state; target azimuths are measured from it.
    pub beta: f64,
    pub s1: BlochVector,
}

/// Finds the rotation angle about a reference axis at polar angle theta_ref
/// (with azimuth defining phi = 0) that carries the +z state onto the
/// equator, and records where it lands.
pub fn prepare_equatorial(
    reference_control: ControlSetting,
    omega_ref: f64,
    theta_ref: f64,
) -> Result<PreparedFrame> {
    if !omega_ref.is_finite() || omega_ref <= 0.0 {
        return Err(Error::DegenerateAxis);
    }
    if !theta_ref.is_finite() || theta_ref > std::f64::consts::FRAC_PI_2 + 1e-9 {
        return Err(Error::AngleOutOfRange {
            name: "theta_ref".into(),
            value: theta_ref,
            range: "(pi/4, pi/2]".into(),
        });
    }
    let cot2 = {
        let t = theta_ref.tan();
        1.0 / (t * t)
    };
    if !cot2.is_finite() || cot2 > 1.0 + 1e-9 {
        return Err(Error::NoEquatorialLanding(theta_ref));
    }
    let alpha0 = (-cot2).clamp(-1.0, 1.0).acos();
    let axis = AxisAngles::from_polar(0.0, omega_ref, theta_ref, 0.0)?;
    let s1 = crate::qubit::rotate_bloch(&axis, alpha0, &BlochVector::new(0.0, 0.0, 1.0)?)?;
    if s1.z.abs() > 1e-6 || (s1.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::EstimateOutOfRange(format!(
            "prepared state ({:.6}, {:.6}, {:.6}) missed the equator",
            s1.x, s1.y, s1.z
        )));
    }
    let beta = s1.y.atan2(s1.x);
    Ok(PreparedFrame { reference_control, omega_ref, theta_ref, alpha0, beta, s1 })
}

/// Recovers the azimuth of a target axis relative to the reference frame by
/// evolving the prepared equatorial state under the target control and
/// reading the in-phase and quadrature first-harmonic components of z(t).
#[allow(clippy::too_many_arguments)]
pub fn identify_phi(
    device: &dyn Device,
    target_control: &ControlSetting,
    frame: &PreparedFrame,
    omega_f: f64,
    theta_f: f64,
    grid: &TimeGrid,
    shots_per_point: u64,
    seed: u64,
) -> Result<HamiltonianEstimate> {
    if !omega_f.is_finite() || omega_f <= 0.0 {
        return Err(Error::OmegaUndetermined(format!(
            "target rotation rate {omega_f} must be positive to place the first harmonic"
        )));
    }
    if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-9).contains(&theta_f) {
        return Err(Error::AngleOutOfRange {
            name: "theta_f".into(),
            value: theta_f,
            range: "[0, pi/2]".into(),
        });
    }
    if theta_f < 1e-3 {
        return Err(Error::PhiUnidentifiable(
            "target axis is aligned with z, so its azimuth leaves no trace".into(),
        ));
    }
    if frame.s1.z.abs() > 1e-6 {
        return Err(Error::PhiUnidentifiable(
            "preparation frame does not land on the equator".into(),
        ));
    }

    let span = grid.len() as f64 * grid.dt;
    let line = omega_f * span / (2.0 * std::f64::consts::PI);
    let bin = line.round() as usize;
    if bin < 1 {
        return Err(Error::InvalidGrid(format!(
            "grid spans {line:.3} target periods; need at least one"
        )));
    }
    if bin > grid.len() / 2 {
        return Err(Error::InvalidGrid(
            "target frequency lies beyond the grid's Nyquist limit".into(),
        ));
    }
    let commensuration_defect = (line - bin as f64).abs();

    let prepare =
        PrepareStep::new(frame.reference_control.clone(), frame.alpha0, frame.omega_ref)?;
    let trace =
        measure_z_trace(device, target_control, Some(&prepare), grid, shots_per_point, seed, true)?;
    let spectrum = dft(&trace)?;
    let n = trace.len();
    let c_hat = spectrum.h0();
    let d_hat = -2.0 * spectrum.coeffs()[bin].im;

    let shots = trace.shots().expect("trace built with shots");
    let mut var_sum = 0.0;
    let mut var_quad = 0.0;
    for (k, (&z, &m)) in trace.values().iter().zip(shots).enumerate() {
        let var = (1.0 - z * z).max(0.0) / m.max(1) as f64;
        var_sum += var;
        let s = (2.0 * std::f64::consts::PI * bin as f64 * k as f64 / n as f64).sin();
        var_quad += var * s * s;
    }
    let sigma_c = var_sum.sqrt() / n as f64;
    let sigma_d = 2.0 * var_quad.sqrt() / n as f64;

    let sin_t = theta_f.sin();
    let in_phase_scale = sin_t * theta_f.cos();
    let significant = d_hat.abs() >= (3.0 * sigma_d).max(1e-9);
    let (phi_hat, candidates, branch_angle, resolved, consistency_gap);
    if in_phase_scale < 1e-6 {
        let sin_val = (-d_hat / sin_t).clamp(-1.0, 1.0);
        let s = sin_val.asin();
        let first = wrap_angle(frame.beta + s);
        let second = wrap_angle(frame.beta + std::f64::consts::PI - s);
        branch_angle = s.abs();
        consistency_gap = 0.0;
        resolved = false;
        candidates = vec![first, second];
        phi_hat = first;
    } else {
        let cos_arg = c_hat / in_phase_scale;
        let margin = 3.0 * sigma_c / in_phase_scale + 1e-9;
        if cos_arg.abs() > 1.0 + margin {
            return Err(Error::EstimateOutOfRange(format!(
                "in-phase component {c_hat:.6} exceeds the geometric bound {in_phase_scale:.6}"
            )));
        }
        let delta = cos_arg.clamp(-1.0, 1.0).acos();
        branch_angle = delta;
        consistency_gap = (d_hat.abs() / sin_t - delta.sin()).abs();
        if significant {
            let sign = if d_hat > 0.0 { -1.0 } else { 1.0 };
            phi_hat = wrap_angle(frame.beta + sign * delta);
            candidates = vec![phi_hat];
            resolved = true;
        } else {
            let plus = wrap_angle(frame.beta + delta);
            let minus = wrap_angle(frame.beta - delta);
            candidates = vec![plus, minus];
            phi_hat = plus;
            resolved = false;
        }
    }

    Ok(HamiltonianEstimate {
        control: target_control.clone(),
        omega_hat: omega_f,
        theta_hat: theta_f,
        phi_hat: Some(phi_hat),
        phi_candidates: candidates,
        omega_undetermined: false,
        grid: *grid,
        shots_per_point,
        oscillation: None,
        azimuth: Some(AzimuthDiagnostics {
            c_hat,
            d_hat,
            sigma_c,
            sigma_d,
            beta: frame.beta,
            branch_angle,
            resolved_by_sign: resolved,
            commensuration_defect,
            consistency_gap,
        }),
        trace: Some(trace),
        spectrum: Some(spectrum),
    })
}

/// What kind of decoherence the statistics point to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoherenceClass {
    PureDephasing,
    SymmetricRelaxation,
    Mixed,
    Undetermined,
}

impl std::fmt::Display for DecoherenceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = match self {
            DecoherenceClass::PureDephasing => "pure dephasing",
            DecoherenceClass::SymmetricRelaxation => "symmetric relaxation",
            DecoherenceClass::Mixed => "mixed",
            DecoherenceClass::Undetermined => "undetermined",
        };
        f.write_str(text)
    }
}

/// Flip fractions of repeated measurements at each dwell time.
#[derive(Clone, Debug, Serialize)]
pub struct FlipStatistics {
    pub dwell_times: Vec<f64>,
    /// Fraction of shots starting in the first outcome that flipped.
    pub flip_from_first: Vec<f64>,
    /// Fraction of shots starting in the second outcome that flipped.
    pub flip_from_second: Vec<f64>,
    pub combined: Vec<f64>,
    pub threshold: f64,
    pub max_combined: f64,
}

/// Decoherence classification plus any rate the data supports.
#[derive(Clone, Debug, Serialize)]
pub struct DecoherenceReport {
    pub classification: DecoherenceClass,
    pub gamma_hat: Option<f64>,
    pub omega0_hat: Option<f64>,
    pub note: String,
    pub flip_statistics: Option<FlipStatistics>,
    pub line_fit: Option<LorentzianFit>,
    pub grid: Option<TimeGrid>,
    pub shots_per_point: u64,
    #[serde(skip)]
    pub trace: Option<SampledTrace>,
    #[serde(skip)]
    pub spectrum: Option<Spectrum>,
}

/// Separates dephasing from relaxation by driving the system about the
/// measurement axis and watching whether repeated measurements disagree:
/// dephasing never flips outcomes, relaxation flips them symmetrically.
pub fn discriminate_dephasing_relaxation(
    device: &dyn Device,
    control: &ControlSetting,
    dwell_times: &[f64],
    shots_per_time: u64,
    seed: u64,
) -> Result<DecoherenceReport> {
    if dwell_times.len() < 2 {
        return Err(Error::InvalidGrid("need at least two dwell times".into()));
    }
    for &t in dwell_times {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidGrid(format!("dwell time {t} must be finite and positive")));
        }
    }

    struct DwellPoint {
        q_first: f64,
        q_second: f64,
        combined: f64,
        n_first: u64,
        n_second: u64,
    }

    let points: Vec<DwellPoint> = dwell_times
        .par_iter()
        .enumerate()
        .map(|(k, &t)| -> Result<DwellPoint> {
            let plan =
                ShotPlan::new(control.clone(), t, shots_per_time, derive_stream_seed(seed, k as u64))?;
            let counts = device.run_experiment_batch(&plan)?;
            if counts.complement_lumped() || counts.n_outcomes() != 2 {
                return Err(Error::OutcomeValuesUnsuitable);
            }
            let n_first = counts.first_outcome_total(0);
            let n_second = counts.first_outcome_total(1);
            if n_first == 0 || n_second == 0 {
                return Err(Error::NoConditionedShots(format!(
                    "dwell time {t} left one outcome branch without shots"
                )));
            }
            let flips_first = counts.count(0, 1);
            let flips_second = counts.count(1, 0);
            Ok(DwellPoint {
                q_first: flips_first as f64 / n_first as f64,
                q_second: flips_second as f64 / n_second as f64,
                combined: (flips_first + flips_second) as f64 / (n_first + n_second) as f64,
                n_first,
                n_second,
            })
        })
        .collect::<Result<_>>()?;

    let stats = FlipStatistics {
        dwell_times: dwell_times.to_vec(),
        flip_from_first: points.iter().map(|p| p.q_first).collect(),
        flip_from_second: points.iter().map(|p| p.q_second).collect(),
        combined: points.iter().map(|p| p.combined).collect(),
        threshold: FLIP_THRESHOLD,
        max_combined: points.iter().map(|p| p.combined).fold(0.0, f64::max),
    };

    let mut report = DecoherenceReport {
        classification: DecoherenceClass::Undetermined,
        gamma_hat: None,
        omega0_hat: None,
        note: String::new(),
        flip_statistics: None,
        line_fit: None,
        grid: None,
        shots_per_point: shots_per_time,
        trace: None,
        spectrum: None,
    };

    if stats.max_combined < FLIP_THRESHOLD {
        report.classification = DecoherenceClass::PureDephasing;
        report.note = if stats.combined.iter().all(|&q| q == 0.0) {
            format!(
                "no flips observed up to t = {}; pure dephasing is indistinguishable \
                 from no decoherence here, and any rate needs the line-width procedure",
                dwell_times.iter().cloned().fold(0.0, f64::max)
            )
        } else {
            format!(
                "flip fraction stayed below {FLIP_THRESHOLD}; populations are preserved, \
                 so decoherence acts on phases only"
            )
        };
        report.flip_statistics = Some(stats);
        return Ok(report);
    }

    let symmetric = points.iter().all(|p| {
        let smooth = |flips: f64, n: u64| {
            let q = (flips * n as f64 + 0.5) / (n as f64 + 1.0);
            q * (1.0 - q) / n as f64
        };
        let sigma2 = smooth(p.q_first, p.n_first) + smooth(p.q_second, p.n_second);
        (p.q_first - p.q_second).abs() <= 5.0 * sigma2.sqrt()
    });
    if !symmetric {
        report.classification = DecoherenceClass::Mixed;
        report.note = "flip rates differ between the two starting outcomes, so decay is \
                       biased toward one state"
            .into();
        report.flip_statistics = Some(stats);
        return Ok(report);
    }

    let mut num = 0.0;
    let mut den = 0.0;
    let mut usable = 0;
    for (p, &t) in points.iter().zip(dwell_times) {
        if p.combined >= 0.499 {
            continue;
        }
        let y = -0.5 * (1.0 - 2.0 * p.combined).ln();
        let n = (p.n_first + p.n_second) as f64;
        let q = (p.combined * n + 0.5) / (n + 1.0);
        let w = n * (1.0 - 2.0 * p.combined).powi(2) / (q * (1.0 - q));
        num += w * t * y;
        den += w * t * t;
        usable += 1;
    }
    if usable < 2 || den <= 0.0 {
        report.note = "flip fractions saturated at 1/2 at every dwell time, leaving the \
                       rate unidentified"
            .into();
        report.flip_statistics = Some(stats);
        return Ok(report);
    }
    report.classification = DecoherenceClass::SymmetricRelaxation;
    report.gamma_hat = Some(num / den);
    report.note = "both branches flip at the same rate; rate fitted from the approach of \
                   the flip fraction toward 1/2"
        .into();
    report.flip_statistics = Some(stats);
    Ok(report)
}

/// Extracts the oscillation frequency and decoherence rate of a damped qubit
/// from the width of its spectral line: measures z(t), takes the power
/// spectrum, and fits a Lorentzian around the dominant peak.
pub fn estimate_decoherence(
    device: &dyn Device,
    control: &ControlSetting,
    grid: &TimeGrid,
    shots_per_point: u64,
    seed: u64,
) -> Result<DecoherenceReport> {
    let trace = measure_z_trace(device, control, None, grid, shots_per_point, seed, true)?;
    let spectrum = dft(&trace)?;
    let peak = spectrum.peak().ok_or(Error::NoPeak)?;
    let half = spectrum.len() / 2;
    let peak_power = peak.coeff.norm_sqr();
    let mut right = 0usize;
    while peak.index + right + 1 <= half
        && spectrum.coeffs()[peak.index + right + 1].norm_sqr() > peak_power / 2.0
    {
        right += 1;
    }
    let mut left = 0usize;
    while peak.index > left + 1
        && spectrum.coeffs()[peak.index - left - 1].norm_sqr() > peak_power / 2.0
    {
        left += 1;
    }
    let hwhm_bins = left.max(right).max(1);
    let half_window = (10 * hwhm_bins).clamp(8, half.max(8));
    let resolution = spectrum.resolution();
    let peak_omega = peak.omega;

    let (classification, gamma_hat, omega0_hat, note, line_fit) =
        match fit_lorentzian(&spectrum, half_window) {
            Ok(fit) if fit.gamma >= resolution => (
                DecoherenceClass::PureDephasing,
                Some(fit.gamma),
                Some(fit.omega0),
                "rate read from the half-width of the spectral line, assuming \
                 dephasing-dominated decay"
                    .to_string(),
                Some(fit),
            ),
            Ok(fit) => (
                DecoherenceClass::Undetermined,
                Some(fit.gamma),
                Some(fit.omega0),
                format!(
                    "fitted line width {:.3e} sits below the grid's frequency resolution \
                     {resolution:.3e}; decoherence is consistent with zero",
                    fit.gamma
                ),
                Some(fit),
            ),
            Err(Error::FitDidNotConverge { .. }) => (
                DecoherenceClass::Undetermined,
                None,
                Some(peak_omega),
                format!(
                    "spectral line is too narrow to carry a width at resolution \
                     {resolution:.3e}; decoherence is consistent with zero"
                ),
                None,
            ),
            Err(e) => return Err(e),
        };
    Ok(DecoherenceReport {
        classification,
        gamma_hat,
        omega0_hat,
        note,
        flip_statistics: None,
        line_fit,
        grid: Some(*grid),
        shots_per_point,
        trace: Some(trace),
        spectrum: Some(spectrum),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::ExpectationDevice;
    use crate::presets;
    use crate::subspace;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn fixed() -> ControlSetting {
        ControlSetting::Vector(vec![])
    }

    #[test]
    fn grid_validation_and_times() {
        let grid = TimeGrid::new(0.0, 0.25, 4).unwrap();
        assert_eq!(grid.len(), 5);
        assert_abs_diff_eq!(grid.time(4), 1.0, epsilon = 1e-15);
        assert!(TimeGrid::new(0.0, 0.0, 4).is_err());
        assert!(TimeGrid::new(-1.0, 0.1, 4).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 0).is_err());
    }

    #[test]
    fn commensurate_grid_covers_whole_periods() {
        let grid = TimeGrid::commensurate(2.0, 8, 512).unwrap();
        let span = grid.len() as f64 * grid.dt;
        assert_abs_diff_eq!(span, 8.0 * PI, epsilon = 1e-12);
        assert_eq!(grid.len(), 512);
    }

    #[test]
    fn equatorial_preparation_matches_known_angles() {
        let frame = prepare_equatorial(fixed(), 1.0, 3.0 * PI / 8.0).unwrap();
        assert_abs_diff_eq!(frame.alpha0, 1.743_222_324_507_7, epsilon = 1e-9);
        assert_abs_diff_eq!(frame.beta, -1.143_717_740_4, epsilon = 1e-9);
        assert_abs_diff_eq!(frame.s1.x, 0.414_213_562_4, epsilon = 1e-9);
        assert_abs_diff_eq!(frame.s1.y, -0.910_179_721_1, epsilon = 1e-9);
        assert!(frame.s1.z.abs() < 1e-12);
    }

    #[test]
    fn equatorial_preparation_boundary_and_failure() {
        let frame = prepare_equatorial(fixed(), 1.0, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(frame.alpha0, PI, epsilon = 1e-9);
        assert_abs_diff_eq!(frame.beta, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(frame.s1.x, 1.0, epsilon = 1e-9);
        match prepare_equatorial(fixed(), 1.0, 0.7) {
            Err(Error::NoEquatorialLanding(_)) => {}
            other => panic!("expected NoEquatorialLanding, got {other:?}"),
        }
        assert!(prepare_equatorial(fixed(), 0.0, 1.0).is_err());
    }

    #[test]
    fn omega_theta_recovered_without_shot_noise() {
        let model = presets::qubit_device(2.0086, 1.4780, 0.3).unwrap();
        let device = ExpectationDevice::new(&model);
        let grid = TimeGrid::new(0.0, 0.01, 2000).unwrap();
        let estimate =
            identify_omega_theta(&device, &fixed(), &grid, 1_000_000_000, 7).unwrap();
        assert!(!estimate.omega_undetermined);
        assert_abs_diff_eq!(estimate.omega_hat, 2.0086, epsilon = 1e-6);
        assert_abs_diff_eq!(estimate.theta_hat, 1.4780, epsilon = 1e-6);
        let osc = estimate.oscillation.unwrap();
        assert!(osc.model_defect < 1e-6);
    }

    #[test]
    fn omega_theta_tolerates_shot_noise() {
        let model = presets::qubit_device(2.0086, 1.4780, 0.3).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 2000).unwrap();
        let estimate = identify_omega_theta(&model, &fixed(), &grid, 100, 42).unwrap();
        assert!((estimate.omega_hat - 2.0086).abs() < 0.02);
        assert!((estimate.theta_hat - 1.4780).abs() < 0.03);
    }

    #[test]
    fn flat_trace_reports_omega_undetermined() {
        let model = presets::qubit_device(2.0, 0.0, 0.0).unwrap();
        let device = ExpectationDevice::new(&model);
        let grid = TimeGrid::new(0.0, 0.01, 400).unwrap();
        let estimate = identify_omega_theta(&device, &fixed(), &grid, 1_000_000_000, 3).unwrap();
        assert!(estimate.omega_undetermined);
        assert_eq!(estimate.theta_hat, 0.0);
    }

    #[test]
    fn phi_recovered_without_shot_noise() {
        let (omega_ref, theta_ref) = (1.0, 3.0 * PI / 8.0);
        let (omega_f, theta_f, phi_f) = (1.2, FRAC_PI_4 * 2.0 / 3.0, FRAC_PI_4);
        let model =
            presets::two_setting_qubit_device(omega_ref, theta_ref, (omega_f, theta_f, phi_f))
                .unwrap();
        let device = ExpectationDevice::new(&model);
        let frame = prepare_equatorial(
            ControlSetting::Label(presets::REFERENCE_CONTROL.into()),
            omega_ref,
            theta_ref,
        )
        .unwrap();
        let grid = TimeGrid::commensurate(omega_f, 8, 512).unwrap();
        let estimate = identify_phi(
            &device,
            &ControlSetting::Label(presets::TARGET_CONTROL.into()),
            &frame,
            omega_f,
            theta_f,
            &grid,
            1_000_000_000,
            11,
        )
        .unwrap();
        let phi_hat = estimate.phi_hat.unwrap();
        assert_abs_diff_eq!(phi_hat, phi_f, epsilon = 1e-5);
        assert!(estimate.azimuth.unwrap().resolved_by_sign);
    }

    #[test]
    fn phi_near_z_axis_is_rejected() {
        let model = presets::two_setting_qubit_device(1.0, 1.5, (1.0, 1e-4, 0.3)).unwrap();
        let frame = prepare_equatorial(
            ControlSetting::Label(presets::REFERENCE_CONTROL.into()),
            1.0,
            1.5,
        )
        .unwrap();
        let grid = TimeGrid::commensurate(1.0, 4, 128).unwrap();
        let result = identify_phi(
            &model,
            &ControlSetting::Label(presets::TARGET_CONTROL.into()),
            &frame,
            1.0,
            1e-4,
            &grid,
            100,
            5,
        );
        assert!(matches!(result, Err(Error::PhiUnidentifiable(_))));
    }

    #[test]
    fn confinement_of_clean_qubit_reaches_unity() {
        let model = presets::qubit_device(2.0, 1.0, 0.0).unwrap();
        let device = ExpectationDevice::new(&model);
        let grid = TimeGrid::commensurate(2.0, 16, 1024).unwrap();
        let report =
            estimate_confinement_fourier(&device, &fixed(), &grid, 1_000_000_000, 9).unwrap();
        assert_abs_diff_eq!(report.spectral_sum, 1.0, epsilon = 1e-6);
        assert!(report.bounds.upper <= 1e-3);
        assert_abs_diff_eq!(report.peak_omega, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn leakage_estimate_matches_exact_curve() {
        let model = presets::ten_level_device();
        let device = ExpectationDevice::new(&model);
        let projector = subspace::projector_onto_basis(10, &[0, 1]).unwrap();
        let grid = TimeGrid::new(0.0, 0.1, 100).unwrap();
        let report = estimate_leakage_direct(
            &device,
            &projector,
            &fixed(),
            &grid,
            1_000_000_000,
            13,
        )
        .unwrap();
        let h = presets::ten_level_hamiltonian();
        let exact =
            subspace::leak_probability_curve(&h, &projector, 0, &grid.times()).unwrap();
        let exact_mean = exact.iter().sum::<f64>() / exact.len() as f64;
        assert_abs_diff_eq!(report.mean_leak, exact_mean, epsilon = 1e-6);
        assert_eq!(report.excluded_shots, 0);
    }

    #[test]
    fn discrimination_separates_dephasing_from_relaxation() {
        let dwell = [0.5, 1.0, 2.0, 3.0, 4.5, 6.0];
        let dephasing = presets::dephasing_qubit_z(2.0, 0.1).unwrap();
        let report =
            discriminate_dephasing_relaxation(&dephasing, &fixed(), &dwell, 800, 21).unwrap();
        assert_eq!(report.classification, DecoherenceClass::PureDephasing);
        assert!(report.note.contains("no flips observed"));

        let relaxing = presets::relaxation_qubit_z(2.0, 0.05).unwrap();
        let report =
            discriminate_dephasing_relaxation(&relaxing, &fixed(), &dwell, 4000, 22).unwrap();
        assert_eq!(report.classification, DecoherenceClass::SymmetricRelaxation);
        let gamma = report.gamma_hat.unwrap();
        assert!((gamma - 0.05).abs() < 0.005, "gamma_hat = {gamma}");
    }

    #[test]
    fn line_width_recovers_dephasing_rate() {
        let model = presets::dephasing_qubit(2.0, 0.2).unwrap();
        let device = ExpectationDevice::new(&model);
        let grid = TimeGrid::new(0.0, 0.1, 800).unwrap();
        let report = estimate_decoherence(&device, &fixed(), &grid, 1_000_000_000, 31).unwrap();
        assert_eq!(report.classification, DecoherenceClass::PureDephasing);
        let gamma = report.gamma_hat.unwrap();
        let omega0 = report.omega0_hat.unwrap();
        assert!((omega0 - 2.0).abs() / 2.0 < 0.005, "omega0_hat = {omega0}");
        assert!((gamma - 0.1).abs() / 0.1 < 0.02, "gamma_hat = {gamma}");
    }

    #[test]
    fn clean_oscillation_flags_width_at_resolution_floor() {
        let model = presets::qubit_device(2.0, FRAC_PI_2, 0.0).unwrap();
        let device = ExpectationDevice::new(&model);
        let grid = TimeGrid::new(0.0, 0.1, 800).unwrap();
        let report = estimate_decoherence(&device, &fixed(), &grid, 1_000_000_000, 33).unwrap();
        assert_eq!(report.classification, DecoherenceClass::Undetermined);
        assert!(report.note.contains("consistent with zero"));
    }

    #[test]
    fn trace_is_deterministic_for_a_seed() {
        let model = presets::qubit_device(1.5, 1.0, 0.0).unwrap();
        let grid = TimeGrid::new(0.0, 0.05, 50).unwrap();
        let a = measure_z_trace(&model, &fixed(), None, &grid, 200, 99, true).unwrap();
        let b = measure_z_trace(&model, &fixed(), None, &grid, 200, 99, true).unwrap();
        let c = measure_z_trace(&model, &fixed(), None, &grid, 200, 100, true).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
    }
}
