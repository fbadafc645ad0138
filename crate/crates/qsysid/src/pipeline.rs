//! Run orchestration: dispatch a validated config to its protocol, then
//! write trace and spectrum CSV files plus a structured result document.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::config::{build_device, parse_config, DecoherenceMode, RunConfig};
use crate::controlfit::{
    compare_models, fit_linear_model, fit_polynomial_component, ControlDataset,
    LinearControlModel, ModelComparison, ModelSpec, PolynomialComponentFit,
};
use crate::device::{derive_stream_seed, Device, DeviceModel, ExpectationDevice};
use crate::error::Error;
use crate::operators::ControlSetting;
use crate::protocols::{
    discriminate_dephasing_relaxation, estimate_confinement_fourier, estimate_decoherence,
    estimate_leakage_direct, identify_omega_theta, identify_phi, prepare_equatorial,
    HamiltonianEstimate, PreparedFrame, TimeGrid,
};
use crate::spectral::{SampledTrace, Spectrum};
use crate::subspace::projector_onto_basis;

/// Version stamped into every result document.
pub const SCHEMA_VERSION: u32 = 1;

/// Shots per point used when recomputing a protocol on exact expectations.
const ORACLE_SHOTS: u64 = 1_000_000_000;

/// Failure stage of a run, which fixes the process exit code.
#[derive(Clone, Debug)]
pub enum PipelineError {
    /// The configuration or invocation is unusable; exit code 1.
    Config(String),
    /// The protocol ran but could not produce its estimate; exit code 2.
    Protocol(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Protocol(_) => 2,
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Config(msg) => write!(f, "config error: {msg}"),
            PipelineError::Protocol(msg) => write!(f, "protocol error: {msg}"),
        }
    }
}

impl std::error::Error for PipelineError {}

fn config_error(e: Error) -> PipelineError {
    PipelineError::Config(e.to_string())
}

fn protocol_error(e: Error) -> PipelineError {
    match e {
        Error::Config(msg) => PipelineError::Config(msg),
        other => PipelineError::Protocol(other.to_string()),
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Clone, Debug, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Recompute every protocol on exact expectation values and add
    /// comparison columns and an oracle report.
    pub oracle: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ToolkitInfo {
    pub name: &'static str,
    pub version: &'static str,
}

/// Protocol result carried by the result document.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportPayload {
    Leakage(crate::protocols::LeakageReport),
    Confinement(crate::protocols::ConfinementReport),
    OmegaTheta(HamiltonianEstimate),
    Phi(PhiReport),
    ControlFit(ControlFitReport),
    Decoherence(crate::protocols::DecoherenceReport),
}

/// Azimuth estimate together with the reference frame that anchored it.
#[derive(Clone, Debug, Serialize)]
pub struct PhiReport {
    pub frame: PreparedFrame,
    pub estimate: HamiltonianEstimate,
}

/// A swept setting the fit had to leave out, and why.
#[derive(Clone, Debug, Serialize)]
pub struct SkippedSetting {
    pub index: usize,
    pub f: Vec<f64>,
    pub reason: String,
}

/// Per-setting estimates, the assembled dataset, and the fitted models.
#[derive(Clone, Debug, Serialize)]
pub struct ControlFitReport {
    pub estimates: Vec<HamiltonianEstimate>,
    pub dataset: ControlDataset,
    /// Settings whose trace carried no usable line; the fits exclude them.
    pub skipped: Vec<SkippedSetting>,
    pub linear: LinearControlModel,
    /// Per-axis polynomial fits, present only for scalar controls.
    pub component_fits: Vec<PolynomialComponentFit>,
    pub comparison: ModelComparison,
}

/// Everything one run produces; serializes byte-identically for identical
/// (config, seed) pairs because nothing in it depends on the clock.
#[derive(Clone, Debug, Serialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub toolkit: ToolkitInfo,
    pub protocol: String,
    pub seed: u64,
    pub grid: Option<TimeGrid>,
    pub shots_per_point: u64,
    /// Shots issued across all plans, before conditioning.
    pub total_shots: u64,
    pub config: RunConfig,
    pub report: ReportPayload,
    /// Same protocol recomputed on exact expectation values.
    pub oracle_report: Option<ReportPayload>,
}

/// The result document plus every file the run wrote.
#[derive(Debug)]
pub struct RunArtifacts {
    pub document: ResultDocument,
    pub document_path: PathBuf,
    pub files: Vec<PathBuf>,
}

struct CsvFile {
    name: &'static str,
    content: String,
}

struct ProtocolOutput {
    report: ReportPayload,
    oracle_report: Option<ReportPayload>,
    grid: Option<TimeGrid>,
    total_shots: u64,
    csvs: Vec<CsvFile>,
}

/// Parses config text, applies overrides, and runs the named protocol.
pub fn run_pipeline_text(text: &str, overrides: &RunOverrides) -> Result<RunArtifacts, PipelineError> {
    let config = parse_config(text).map_err(config_error)?;
    run_pipeline(config, overrides)
}

/// Runs the configured protocol and writes its artifacts.
pub fn run_pipeline(mut config: RunConfig, overrides: &RunOverrides) -> Result<RunArtifacts, PipelineError> {
    if let Some(seed) = overrides.seed {
        config.protocol.seed = seed;
    }
    if let Some(dir) = &overrides.out_dir {
        config.output.dir = Some(dir.clone());
    }
    let device = build_device(&config.device).map_err(config_error)?;
    check_controls(&device, &config).map_err(config_error)?;

    let output = dispatch(&device, &config, overrides.oracle).map_err(protocol_error)?;

    let document = ResultDocument {
        schema_version: SCHEMA_VERSION,
        toolkit: ToolkitInfo { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") },
        protocol: config.protocol.name.clone(),
        seed: config.protocol.seed,
        grid: output.grid,
        shots_per_point: config.protocol.shots,
        total_shots: output.total_shots,
        config: config.clone(),
        report: output.report,
        oracle_report: output.oracle_report,
    };

    let dir = config.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| PipelineError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for csv in &output.csvs {
        files.push(write_file(&dir, csv.name, &csv.content)?);
    }
    let json = serde_json::to_string_pretty(&document)
        .map_err(|e| PipelineError::Protocol(format!("cannot serialize result document: {e}")))?;
    let document_path = write_file(&dir, "result.json", &(json + "\n"))?;
    files.push(document_path.clone());

    Ok(RunArtifacts { document, document_path, files })
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, PipelineError> {
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| PipelineError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Resolves every control the protocol will use so unknown labels and arity
/// mismatches surface as config errors before any shots are spent.
fn check_controls(device: &DeviceModel, config: &RunConfig) -> Result<(), Error> {
    let mut settings: Vec<(String, ControlSetting)> = Vec::new();
    let p = &config.protocol;
    match p.name.as_str() {
        "identify-phi" => {
            let phi = p.phi.as_ref().expect("validated");
            settings.push(("protocol.phi.reference_control".into(), phi.reference_control.clone()));
            settings.push(("protocol.phi.target_control".into(), phi.target_control.clone()));
        }
        "fit-control" => {
            let fit = p.fit.as_ref().expect("validated");
            for (k, s) in fit.settings.iter().enumerate() {
                settings.push((format!("protocol.fit.settings[{k}].control"), s.control.clone()));
            }
        }
        _ => settings.push(("protocol.control".into(), p.control())),
    }
    for (field, setting) in settings {
        device.hamiltonians().resolve(&setting).map_err(|e| e.in_field(&field))?;
    }
    Ok(())
}

fn dispatch(device: &DeviceModel, config: &RunConfig, oracle: bool) -> Result<ProtocolOutput, Error> {
    match config.protocol.name.as_str() {
        "leakage-direct" => run_leakage(device, config, oracle),
        "confinement-fourier" => run_confinement(device, config, oracle),
        "identify-omega-theta" => run_omega_theta(device, config, oracle),
        "identify-phi" => run_phi(device, config, oracle),
        "fit-control" => run_fit_control(device, config, oracle),
        "decoherence" => run_decoherence(device, config, oracle),
        other => Err(Error::Config(format!("unknown protocol {other:?}"))),
    }
}

fn run_leakage(device: &DeviceModel, config: &RunConfig, oracle: bool) -> Result<ProtocolOutput, Error> {
    let p = &config.protocol;
    let grid = p.grid()?;
    let subspace = p.subspace.as_ref().expect("validated");
    let projector = projector_onto_basis(device.dim(), subspace)?;
    let control = p.control();
    let report = estimate_leakage_direct(device, &projector, &control, &grid, p.shots, p.seed)?;

    let oracle_report = if oracle {
        let exact = ExpectationDevice::new(device);
        Some(estimate_leakage_direct(&exact, &projector, &control, &grid, ORACLE_SHOTS, p.seed)?)
    } else {
        None
    };

    let times: Vec<f64> = grid.times();
    let oracle_column = oracle_report
        .as_ref()
        .map(|r| ("p_leak_exact", r.estimates.clone()));
    let trace_csv = csv_rows(
        "t,p_leak_hat,shots",
        &times,
        &report.estimates,
        &report.conditioned_per_point,
        oracle_column.as_ref(),
    );

    Ok(ProtocolOutput {
        total_shots: p.shots * grid.len() as u64,
        grid: Some(grid),
        report: ReportPayload::Leakage(report),
        oracle_report: oracle_report.map(ReportPayload::Leakage),
        csvs: vec![CsvFile { name: "trace.csv", content: trace_csv }],
    })
}

fn run_confinement(device: &DeviceModel, config: &RunConfig, oracle: bool) -> Result<ProtocolOutput, Error> {
    let p = &config.protocol;
    let grid = p.grid()?;
    let control = p.control();
    let report = estimate_confinement_fourier(device, &control, &grid, p.shots, p.seed)?;

    let oracle_report = if oracle {
        let exact = ExpectationDevice::new(device);
        Some(estimate_confinement_fourier(&exact, &control, &grid, ORACLE_SHOTS, p.seed)?)
    } else {
        None
    };

    let oracle_column = oracle_report
        .as_ref()
        .map(|r| ("p0_exact", r.trace.values().to_vec()));
    let trace_csv = trace_csv(&report.trace, "p0_hat", oracle_column.as_ref());
    let spectrum_csv = spectrum_csv(&report.spectrum);

    Ok(ProtocolOutput {
        total_shots: p.shots * grid.len() as u64,
        grid: Some(grid),
        report: ReportPayload::Confinement(report),
        oracle_report: oracle_report.map(ReportPayload::Confinement),
        csvs: vec![
            CsvFile { name: "trace.csv", content: trace_csv },
            CsvFile { name: "spectrum.csv", content: spectrum_csv },
        ],
    })
}

fn run_omega_theta(device: &DeviceModel, config: &RunConfig, oracle: bool) -> Result<ProtocolOutput, Error> {
    let p = &config.protocol;
    let grid = p.grid()?;
    let control = p.control();
    let report = identify_omega_theta(device, &control, &grid, p.shots, p.seed)?;
    if report.omega_undetermined {
        return Err(Error::OmegaUndetermined(
            "the measured trace carries no spectral line above the noise floor".into(),
        ));
    }

    let oracle_report = if oracle {
        let exact = ExpectationDevice::new(device);
        Some(identify_omega_theta(&exact, &control, &grid, ORACLE_SHOTS, p.seed)?)
    } else {
        None
    };

    let mut csvs = Vec::new();
    if let Some(trace) = &report.trace {
        let oracle_column = oracle_report
            .as_ref()
            .and_then(|r| r.trace.as_ref())
            .map(|t| ("z_exact", t.values().to_vec()));
        csvs.push(CsvFile { name: "trace.csv", content: trace_csv(trace, "z_hat", oracle_column.as_ref()) });
    }
    if let Some(spectrum) = &report.spectrum {
        csvs.push(CsvFile { name: "spectrum.csv", content: spectrum_csv(spectrum) });
    }

    Ok(ProtocolOutput {
        total_shots: p.shots * grid.len() as u64,
        grid: Some(grid),
        report: ReportPayload::OmegaTheta(report),
        oracle_report: oracle_report.map(ReportPayload::OmegaTheta),
        csvs,
    })
}

fn run_phi(device: &DeviceModel, config: &RunConfig, oracle: bool) -> Result<ProtocolOutput, Error> {
    let p = &config.protocol;
    let phi = p.phi.as_ref().expect("validated");
    let grid = p.grid()?;
    let frame = prepare_equatorial(phi.reference_control.clone(), phi.omega_ref, phi.theta_ref)?;
    let report = identify_phi(
        device,
        &phi.target_control,
        &frame,
        phi.omega_target,
        phi.theta_target,
        &grid,
        p.shots,
        p.seed,
    )?;

    let oracle_report = if oracle {
        let exact = ExpectationDevice::new(device);
        let estimate = identify_phi(
            &exact,
            &phi.target_control,
            &frame,
            phi.omega_target,
            phi.theta_target,
            &grid,
            ORACLE_SHOTS,
            p.seed,
        )?;
        Some(PhiReport { frame: frame.clone(), estimate })
    } else {
        None
    };

    let mut csvs = Vec::new();
    if let Some(trace) = &report.trace {
        let oracle_column = oracle_report
            .as_ref()
            .and_then(|r| r.estimate.trace.as_ref())
            .map(|t| ("z_exact", t.values().to_vec()));
        csvs.push(CsvFile { name: "trace.csv", content: trace_csv(trace, "z_hat", oracle_column.as_ref()) });
    }
    if let Some(spectrum) = &report.spectrum {
        csvs.push(CsvFile { name: "spectrum.csv", content: spectrum_csv(spectrum) });
    }

    Ok(ProtocolOutput {
        total_shots: p.shots * grid.len() as u64,
        grid: Some(grid),
        report: ReportPayload::Phi(PhiReport { frame, estimate: report }),
        oracle_report: oracle_report.map(ReportPayload::Phi),
        csvs,
    })
}

fn identify_settings(
    device: &dyn Device,
    config: &RunConfig,
    grid: &TimeGrid,
    shots: u64,
) -> Result<(Vec<Vec<f64>>, Vec<HamiltonianEstimate>, Vec<SkippedSetting>), Error> {
    let fit = config.protocol.fit.as_ref().expect("validated");
    let mut controls = Vec::new();
    let mut estimates = Vec::new();
    let mut skipped = Vec::new();
    for (k, setting) in fit.settings.iter().enumerate() {
        let seed = derive_stream_seed(config.protocol.seed, k as u64);
        let estimate = identify_omega_theta(device, &setting.control, grid, shots, seed)?;
        if estimate.omega_undetermined {
            skipped.push(SkippedSetting {
                index: k,
                f: setting.f.clone(),
                reason: "no spectral line; the axis is unobservable without precession".into(),
            });
            continue;
        }
        controls.push(setting.f.clone());
        estimates.push(estimate);
    }
    Ok((controls, estimates, skipped))
}

fn fit_report(
    controls: &[Vec<f64>],
    estimates: Vec<HamiltonianEstimate>,
    skipped: Vec<SkippedSetting>,
    degrees: &[usize],
) -> Result<ControlFitReport, Error> {
    let dataset = ControlDataset::from_estimates(controls, &estimates)?;
    let linear = fit_linear_model(&dataset)?;
    let mut component_fits = Vec::new();
    if dataset.arity() == 1 {
        for &degree in degrees {
            for axis in crate::controlfit::Axis::ALL {
                component_fits.push(fit_polynomial_component(&dataset, axis, degree)?);
            }
        }
    }
    let mut specs = vec![ModelSpec::Linear];
    if dataset.arity() == 1 {
        specs.extend(degrees.iter().map(|&d| ModelSpec::Polynomial(d)));
    }
    let comparison = compare_models(&dataset, &specs)?;
    Ok(ControlFitReport { estimates, dataset, skipped, linear, component_fits, comparison })
}

fn run_fit_control(device: &DeviceModel, config: &RunConfig, oracle: bool) -> Result<ProtocolOutput, Error> {
    let p = &config.protocol;
    let grid = p.grid()?;
    let fit = p.fit.as_ref().expect("validated");
    let (controls, estimates, skipped) = identify_settings(device, config, &grid, p.shots)?;
    let report = fit_report(&controls, estimates, skipped, &fit.polynomial_degrees)?;

    let oracle_report = if oracle {
        let exact = ExpectationDevice::new(device);
        let (oracle_controls, estimates, skipped) =
            identify_settings(&exact, config, &grid, ORACLE_SHOTS)?;
        Some(fit_report(&oracle_controls, estimates, skipped, &fit.polynomial_degrees)?)
    } else {
        None
    };

    let dataset_csv = dataset_csv(&report.dataset, oracle_report.as_ref().map(|r| &r.dataset));

    Ok(ProtocolOutput {
        total_shots: p.shots * grid.len() as u64 * fit.settings.len() as u64,
        grid: Some(grid),
        report: ReportPayload::ControlFit(report),
        oracle_report: oracle_report.map(ReportPayload::ControlFit),
        csvs: vec![CsvFile { name: "dataset.csv", content: dataset_csv }],
    })
}

fn run_decoherence(device: &DeviceModel, config: &RunConfig, oracle: bool) -> Result<ProtocolOutput, Error> {
    let p = &config.protocol;
    let block = p.decoherence.clone().unwrap_or_default();
    match block.mode {
        DecoherenceMode::LineWidth => {
            let grid = p.grid()?;
            let control = p.control();
            let report = estimate_decoherence(device, &control, &grid, p.shots, p.seed)?;
            let oracle_report = if oracle {
                let exact = ExpectationDevice::new(device);
                Some(estimate_decoherence(&exact, &control, &grid, ORACLE_SHOTS, p.seed)?)
            } else {
                None
            };
            let mut csvs = Vec::new();
            if let Some(trace) = &report.trace {
                let oracle_column = oracle_report
                    .as_ref()
                    .and_then(|r| r.trace.as_ref())
                    .map(|t| ("z_exact", t.values().to_vec()));
                csvs.push(CsvFile {
                    name: "trace.csv",
                    content: trace_csv(trace, "z_hat", oracle_column.as_ref()),
                });
            }
            if let Some(spectrum) = &report.spectrum {
                csvs.push(CsvFile { name: "spectrum.csv", content: spectrum_csv(spectrum) });
            }
            Ok(ProtocolOutput {
                total_shots: p.shots * grid.len() as u64,
                grid: Some(grid),
                report: ReportPayload::Decoherence(report),
                oracle_report: oracle_report.map(ReportPayload::Decoherence),
                csvs,
            })
        }
        DecoherenceMode::Discriminate => {
            let control = p.control();
            let report =
                discriminate_dephasing_relaxation(device, &control, &block.dwell_times, p.shots, p.seed)?;
            let oracle_report = if oracle {
                let exact = ExpectationDevice::new(device);
                Some(discriminate_dephasing_relaxation(
                    &exact,
                    &control,
                    &block.dwell_times,
                    ORACLE_SHOTS,
                    p.seed,
                )?)
            } else {
                None
            };
            let flips_csv = flips_csv(&report, oracle_report.as_ref(), p.shots);
            Ok(ProtocolOutput {
                total_shots: p.shots * block.dwell_times.len() as u64,
                grid: None,
                report: ReportPayload::Decoherence(report),
                oracle_report: oracle_report.map(ReportPayload::Decoherence),
                csvs: vec![CsvFile { name: "flips.csv", content: flips_csv }],
            })
        }
    }
}

fn csv_rows(
    header: &str,
    times: &[f64],
    values: &[f64],
    shots: &[u64],
    oracle: Option<&(&str, Vec<f64>)>,
) -> String {
    let mut out = String::from(header);
    if let Some((name, _)) = oracle {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for k in 0..times.len() {
        out.push_str(&format!("{},{},{}", times[k], values[k], shots[k]));
        if let Some((_, column)) = oracle {
            out.push_str(&format!(",{}", column[k]));
        }
        out.push('\n');
    }
    out
}

fn trace_csv(trace: &SampledTrace, value_name: &str, oracle: Option<&(&str, Vec<f64>)>) -> String {
    let times: Vec<f64> = trace.times().collect();
    let shots: Vec<u64> = match trace.shots() {
        Some(s) => s.to_vec(),
        None => vec![0; trace.len()],
    };
    csv_rows(&format!("t,{value_name},shots"), &times, trace.values(), &shots, oracle)
}

fn spectrum_csv(spectrum: &Spectrum) -> String {
    let mut out = String::from("omega,re,im,abs\n");
    for (freq, coeff) in spectrum.freqs().iter().zip(spectrum.coeffs()) {
        let c: Complex64 = *coeff;
        out.push_str(&format!("{},{},{},{}\n", freq, c.re, c.im, c.norm()));
    }
    out
}

fn dataset_csv(dataset: &ControlDataset, oracle: Option<&ControlDataset>) -> String {
    let mut out = dataset.to_csv();
    let Some(exact) = oracle else {
        return out;
    };
    if exact.controls() != dataset.controls() {
        return out;
    }
    let mut lines = out.lines();
    let header = lines.next().unwrap_or_default();
    let mut combined = format!("{header},d_x_exact,d_y_exact,d_z_exact\n");
    for (row, axis) in lines.zip(exact.axes()) {
        combined.push_str(&format!("{row},{},{},{}\n", axis[0], axis[1], axis[2]));
    }
    out = combined;
    out
}

fn flips_csv(
    report: &crate::protocols::DecoherenceReport,
    oracle: Option<&crate::protocols::DecoherenceReport>,
    shots: u64,
) -> String {
    let mut out = String::from("t,flip_from_first,flip_from_second,combined,shots");
    let stats = report.flip_statistics.as_ref();
    let exact = oracle.and_then(|r| r.flip_statistics.as_ref());
    if exact.is_some() {
        out.push_str(",combined_exact");
    }
    out.push('\n');
    if let Some(stats) = stats {
        for k in 0..stats.dwell_times.len() {
            out.push_str(&format!(
                "{},{},{},{},{}",
                stats.dwell_times[k],
                stats.flip_from_first[k],
                stats.flip_from_second[k],
                stats.combined[k],
                shots
            ));
            if let Some(exact) = exact {
                out.push_str(&format!(",{}", exact.combined[k]));
            }
            out.push('\n');
        }
    }
    out
}

/// One row per protocol: name, required config sections, what it estimates.
const PROTOCOL_TABLE: [(&str, &str, &str); 6] = [
    (
        "confinement-fourier",
        "device, protocol",
        "certify confinement to a plane from the return-probability spectrum",
    ),
    (
        "decoherence",
        "device, protocol [, protocol.decoherence]",
        "classify dephasing against relaxation and estimate the rate",
    ),
    (
        "fit-control",
        "device, protocol, protocol.fit",
        "identify the rotation axis per control setting and fit models of its dependence",
    ),
    (
        "identify-omega-theta",
        "device, protocol",
        "rotation rate and polar angle from an expectation trace",
    ),
    (
        "identify-phi",
        "device, protocol, protocol.phi",
        "azimuth relative to a prepared reference frame",
    ),
    (
        "leakage-direct",
        "device, protocol, protocol.subspace",
        "mean population outside a protected subspace, conditioned on starting inside",
    ),
];

/// Stable-sorted table of protocol names, required sections, descriptions.
pub fn list_protocols() -> String {
    let name_width = PROTOCOL_TABLE.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let fields_width = PROTOCOL_TABLE.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (name, fields, description) in PROTOCOL_TABLE {
        out.push_str(&format!("{name:<name_width$}  {fields:<fields_width$}  {description}\n"));
    }
    out
}
