//! TOML run configuration: a device description, a protocol selection with
//! its grid and seed, and output options.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceModel, Observable};
use crate::error::{Error, Result};
use crate::operators::{
    ControlSetting, ControlledHamiltonian, DensityMatrix, HermitianOperator, LindbladDissipator,
};
use crate::protocols::TimeGrid;

/// The protocol names the pipeline can dispatch, sorted.
pub const PROTOCOL_NAMES: [&str; 6] = [
    "confinement-fourier",
    "decoherence",
    "fit-control",
    "identify-omega-theta",
    "identify-phi",
    "leakage-direct",
];

fn default_dt() -> f64 {
    0.01
}

fn default_steps() -> usize {
    2000
}

fn default_shots() -> u64 {
    100
}

fn default_degrees() -> Vec<usize> {
    vec![1, 2]
}

/// A matrix as a row-major list of (re, im) pairs, dim^2 entries long.
pub type MatrixConfig = Vec<[f64; 2]>;

/// Complete description of one reproducible run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// The simulated device: Hamiltonian family, dissipator, readout.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub dim: usize,
    pub hamiltonian: HamiltonianConfig,
    #[serde(default)]
    pub dissipator: Vec<DissipatorTermConfig>,
    /// Optional unitary conjugating every dissipation operator.
    #[serde(default)]
    pub dissipator_basis: Option<MatrixConfig>,
    pub observable: ObservableConfig,
    #[serde(default)]
    pub pre_measurement: PreMeasurementConfig,
}

/// Either named Hamiltonians per control label or an affine control form.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    Table { table: BTreeMap<String, MatrixConfig> },
    Linear {
        base: MatrixConfig,
        #[serde(default)]
        terms: Vec<MatrixConfig>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipatorTermConfig {
    pub rate: f64,
    pub operator: MatrixConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    /// One eigenvalue per basis state; repeats merge into one outcome.
    pub eigenvalues: Vec<f64>,
}

/// State the device holds before the initializing measurement.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PreMeasurementConfig {
    #[default]
    MaximallyMixed,
    Basis {
        index: usize,
    },
    Matrix {
        matrix: MatrixConfig,
    },
}

/// Which protocol runs, over what grid, with which seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub name: String,
    /// Base seed for every batch; runs are replayable, so there is no
    /// wall-clock fallback.
    pub seed: u64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
    /// Control under which evolution runs; defaults to a fixed Hamiltonian.
    #[serde(default)]
    pub control: Option<ControlSetting>,
    /// Basis indices of the protected subspace (leakage-direct).
    #[serde(default)]
    pub subspace: Option<Vec<usize>>,
    #[serde(default)]
    pub phi: Option<PhiConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub decoherence: Option<DecoherenceConfig>,
}

/// Reference and target frames for azimuth identification.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    pub reference_control: ControlSetting,
    pub omega_ref: f64,
    pub theta_ref: f64,
    pub target_control: ControlSetting,
    pub omega_target: f64,
    pub theta_target: f64,
    /// When set, the grid is rebuilt to span this many whole target periods
    /// with steps + 1 samples, pinning the first harmonic onto a bin.
    #[serde(default)]
    pub cycles: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettingConfig {
    /// Numeric control coordinates used as regressors.
    pub f: Vec<f64>,
    /// Device control realizing this setting.
    pub control: ControlSetting,
}

/// Settings swept and models compared by fit-control.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub settings: Vec<FitSettingConfig>,
    #[serde(default = "default_degrees")]
    pub polynomial_degrees: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DecoherenceMode {
    #[default]
    LineWidth,
    Discriminate,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceConfig {
    #[serde(default)]
    pub mode: DecoherenceMode,
    #[serde(default)]
    pub dwell_times: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for result and CSV files; default is the working directory.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<()> {
    let p = &config.protocol;
    if !PROTOCOL_NAMES.contains(&p.name.as_str()) {
        return Err(Error::Config(format!(
            "unknown protocol {:?}; known protocols: {}",
            p.name,
            PROTOCOL_NAMES.join(", ")
        )));
    }
    if config.device.dim < 2 {
        return Err(Error::Config("device.dim must be at least 2".into()));
    }
    TimeGrid::new(p.t0, p.dt, p.steps).map_err(|e| e.in_field("protocol"))?;
    if p.shots == 0 {
        return Err(Error::Config("protocol.shots must be at least 1".into()));
    }
    if config.device.observable.eigenvalues.len() != config.device.dim {
        return Err(Error::Config(format!(
            "device.observable.eigenvalues has {} entries for dim {}",
            config.device.observable.eigenvalues.len(),
            config.device.dim
        )));
    }
    match p.name.as_str() {
        "leakage-direct" => {
            let subspace = p.subspace.as_ref().ok_or_else(|| {
                Error::Config("leakage-direct requires protocol.subspace".into())
            })?;
            if subspace.is_empty() {
                return Err(Error::Config("protocol.subspace must not be empty".into()));
            }
            if let Some(&bad) = subspace.iter().find(|&&i| i >= config.device.dim) {
                return Err(Error::Config(format!(
                    "protocol.subspace index {bad} is outside dim {}",
                    config.device.dim
                )));
            }
        }
        "identify-phi" => {
            if p.phi.is_none() {
                return Err(Error::Config("identify-phi requires a [protocol.phi] block".into()));
            }
        }
        "fit-control" => {
            let fit = p.fit.as_ref().ok_or_else(|| {
                Error::Config("fit-control requires a [protocol.fit] block".into())
            })?;
            if fit.settings.is_empty() {
                return Err(Error::Config("protocol.fit.settings must not be empty".into()));
            }
            let arity = fit.settings[0].f.len();
            if fit.settings.iter().any(|s| s.f.len() != arity) {
                return Err(Error::Config(
                    "protocol.fit.settings rows disagree on the number of f components".into(),
                ));
            }
        }
        "decoherence" => {
            let block = p.decoherence.clone().unwrap_or_default();
            if block.mode == DecoherenceMode::Discriminate && block.dwell_times.len() < 2 {
                return Err(Error::Config(
                    "discriminate mode needs at least two protocol.decoherence.dwell_times"
                        .into(),
                ));
            }
        }
        _ => {}
    }
    Ok(())
}

fn matrix_from_pairs(dim: usize, pairs: &MatrixConfig, field: &str) -> Result<DMatrix<Complex64>> {
    if pairs.len() != dim * dim {
        return Err(Error::Config(format!(
            "{field} has {} (re, im) pairs, expected {}",
            pairs.len(),
            dim * dim
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| {
        let [re, im] = pairs[r * dim + c];
        Complex64::new(re, im)
    }))
}

fn hermitian_from_pairs(dim: usize, pairs: &MatrixConfig, field: &str) -> Result<HermitianOperator> {
    HermitianOperator::new(matrix_from_pairs(dim, pairs, field)?)
        .map_err(|e| e.in_field(field))
}

/// Builds the simulated device described by the config's device section.
pub fn build_device(config: &DeviceConfig) -> Result<DeviceModel> {
    let dim = config.dim;
    let hamiltonians = match &config.hamiltonian {
        HamiltonianConfig::Table { table } => {
            if table.is_empty() {
                return Err(Error::Config("device.hamiltonian.table is empty".into()));
            }
            let mut map = BTreeMap::new();
            for (label, pairs) in table {
                let field = format!("device.hamiltonian.table.{label}");
                map.insert(label.clone(), hermitian_from_pairs(dim, pairs, &field)?);
            }
            ControlledHamiltonian::table(map).map_err(|e| e.in_field("device.hamiltonian"))?
        }
        HamiltonianConfig::Linear { base, terms } => {
            let base = hermitian_from_pairs(dim, base, "device.hamiltonian.base")?;
            let terms = terms
                .iter()
                .enumerate()
                .map(|(i, pairs)| {
                    hermitian_from_pairs(dim, pairs, &format!("device.hamiltonian.terms[{i}]"))
                })
                .collect::<Result<Vec<_>>>()?;
            ControlledHamiltonian::linear(base, terms)
                .map_err(|e| e.in_field("device.hamiltonian"))?
        }
    };

    let mut dissipator = if config.dissipator.is_empty() {
        LindbladDissipator::empty()
    } else {
        let terms = config
            .dissipator
            .iter()
            .enumerate()
            .map(|(i, term)| {
                let field = format!("device.dissipator[{i}].operator");
                Ok((term.rate, matrix_from_pairs(dim, &term.operator, &field)?))
            })
            .collect::<Result<Vec<_>>>()?;
        LindbladDissipator::new(terms).map_err(|e| e.in_field("device.dissipator"))?
    };
    if let Some(pairs) = &config.dissipator_basis {
        let u = matrix_from_pairs(dim, pairs, "device.dissipator_basis")?;
        dissipator =
            dissipator.with_basis_change(u).map_err(|e| e.in_field("device.dissipator_basis"))?;
    }

    let observable = Observable::from_eigenvalues(&config.observable.eigenvalues)
        .map_err(|e| e.in_field("device.observable"))?;

    let pre = match &config.pre_measurement {
        PreMeasurementConfig::MaximallyMixed => DensityMatrix::maximally_mixed(dim),
        PreMeasurementConfig::Basis { index } => DensityMatrix::basis_state(dim, *index)
            .map_err(|e| e.in_field("device.pre_measurement"))?,
        PreMeasurementConfig::Matrix { matrix } => {
            let m = matrix_from_pairs(dim, matrix, "device.pre_measurement.matrix")?;
            DensityMatrix::new(m).map_err(|e| e.in_field("device.pre_measurement.matrix"))?
        }
    };

    DeviceModel::new(hamiltonians, dissipator, observable, pre)
        .map_err(|e| e.in_field("device"))
}

impl ProtocolConfig {
    /// The evolution-time grid this protocol section describes.
    pub fn grid(&self) -> Result<TimeGrid> {
        if self.name == "identify-phi" {
            if let Some(phi) = &self.phi {
                if let Some(cycles) = phi.cycles {
                    return TimeGrid::commensurate(phi.omega_target, cycles, self.steps + 1);
                }
            }
        }
        TimeGrid::new(self.t0, self.dt, self.steps)
    }

    /// The control under which timed evolution runs.
    pub fn control(&self) -> ControlSetting {
        self.control.clone().unwrap_or(ControlSetting::Vector(Vec::new()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [device]
        dim = 2
        [device.hamiltonian]
        kind = "linear"
        base = [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.5, 0.0]]
        [device.observable]
        eigenvalues = [1.0, -1.0]
        [protocol]
        name = "identify-omega-theta"
        seed = 7
    "#;

    #[test]
    fn minimal_config_applies_defaults() {
        let config = parse_config(MINIMAL).unwrap();
        assert_eq!(config.protocol.dt, 0.01);
        assert_eq!(config.protocol.steps, 2000);
        assert_eq!(config.protocol.shots, 100);
        assert_eq!(config.protocol.seed, 7);
        let device = build_device(&config.device).unwrap();
        assert_eq!(device.dim(), 2);
        let grid = config.protocol.grid().unwrap();
        assert_eq!(grid.len(), 2001);
    }

    #[test]
    fn missing_seed_is_rejected() {
        let text = MINIMAL.replace("seed = 7", "");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_protocol_is_rejected() {
        let text = MINIMAL.replace("identify-omega-theta", "identify-everything");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("identify-everything"));
        assert!(err.to_string().contains("leakage-direct"));
    }

    #[test]
    fn non_hermitian_matrix_names_the_entries() {
        let text = MINIMAL.replace("[[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.5, 0.0]]",
            "[[0.5, 0.0], [0.3, 0.0], [0.1, 0.0], [-0.5, 0.0]]");
        let config = parse_config(&text).unwrap();
        let err = build_device(&config.device).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("device.hamiltonian.base"), "{msg}");
        assert!(msg.contains("(0,1)") || msg.contains("(1,0)"), "{msg}");
    }

    #[test]
    fn table_form_and_labels_resolve() {
        let text = r#"
            [device]
            dim = 2
            [device.hamiltonian]
            kind = "table"
            [device.hamiltonian.table]
            "reference" = [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.5, 0.0]]
            "target" = [[0.0, 0.0], [0.5, 0.0], [0.5, 0.0], [0.0, 0.0]]
            [device.observable]
            eigenvalues = [1.0, -1.0]
            [protocol]
            name = "identify-omega-theta"
            seed = 1
            control = "target"
        "#;
        let config = parse_config(text).unwrap();
        let device = build_device(&config.device).unwrap();
        let h = device.hamiltonians().resolve(&config.protocol.control()).unwrap();
        assert_eq!(h.entries()[(0, 1)].re, 0.5);
    }

    #[test]
    fn leakage_requires_subspace_indices() {
        let text = MINIMAL.replace("identify-omega-theta", "leakage-direct");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("subspace"));
    }

    #[test]
    fn dissipator_and_pre_measurement_parse() {
        let text = r#"
            [device]
            dim = 2
            [device.hamiltonian]
            kind = "linear"
            base = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 0.0]]
            [[device.dissipator]]
            rate = 0.1
            operator = [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.5, 0.0]]
            [device.observable]
            eigenvalues = [1.0, -1.0]
            [device.pre_measurement]
            kind = "basis"
            index = 0
            [protocol]
            name = "decoherence"
            seed = 3
            [protocol.decoherence]
            mode = "discriminate"
            dwell_times = [0.5, 1.0, 2.0]
        "#;
        let config = parse_config(text).unwrap();
        let device = build_device(&config.device).unwrap();
        assert_eq!(device.dim(), 2);
        assert_eq!(
            config.protocol.decoherence.as_ref().unwrap().mode,
            DecoherenceMode::Discriminate
        );
    }

    #[test]
    fn phi_cycles_build_a_commensurate_grid() {
        let text = r#"
            [device]
            dim = 2
            [device.hamiltonian]
            kind = "table"
            [device.hamiltonian.table]
            "reference" = [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.5, 0.0]]
            "target" = [[0.0, 0.0], [0.6, 0.0], [0.6, 0.0], [0.0, 0.0]]
            [device.observable]
            eigenvalues = [1.0, -1.0]
            [protocol]
            name = "identify-phi"
            seed = 5
            steps = 511
            [protocol.phi]
            reference_control = "reference"
            omega_ref = 1.0
            theta_ref = 0.7853981633974483
            target_control = "target"
            omega_target = 1.2
            theta_target = 0.5235987755982988
            cycles = 8
        "#;
        let config = parse_config(text).unwrap();
        let grid = config.protocol.grid().unwrap();
        assert_eq!(grid.len(), 512);
        let span = grid.len() as f64 * grid.dt;
        let period = 2.0 * std::f64::consts::PI / 1.2;
        assert!((span / period - 8.0).abs() < 1e-12);
    }
}
