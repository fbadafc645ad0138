//! Simulation and black-box identification of small quantum devices.
//!
//! The crate has two halves. The simulation half models an N-level system
//! evolving under a controllable Hamiltonian and an optional Lindblad
//! dissipator, and reproduces the experimental loop of initialize-by-measurement,
//! timed evolution, and projective readout, shot by shot, with seeded
//! reproducible noise. The identification half contains estimation protocols
//! that see the device only through measurement counts: they bound how well
//! the dynamics stays inside a chosen subspace, recover the rotation frequency
//! and axis angles of an effective two-level Hamiltonian, fit functional
//! models of the control dependence, and extract dephasing rates from the
//! broadening of spectral peaks.
//!
//! Start with [`presets`] for ready-made devices, [`protocols`] for the
//! estimation drivers, and [`pipeline`] for the config-driven command-line
//! entry point. Each major capability also has a runnable example under
//! `examples/`.

pub mod config;
pub mod controlfit;
pub mod device;
pub mod error;
pub mod evolve;
mod linalg;
pub mod operators;
pub mod pipeline;
pub mod presets;
pub mod protocols;
pub mod qubit;
pub mod spectral;
pub mod subspace;
pub mod tol;

pub use device::{
    estimate_z, sample_measurement, CountsTable, Device, DeviceModel, ExpectationDevice,
    Observable, PrepareStep, ShotPlan,
};
pub use error::{Error, Result};
pub use operators::{
    ControlSetting, ControlledHamiltonian, DensityMatrix, HermitianOperator, LindbladDissipator,
};
pub use config::{parse_config, RunConfig};
pub use pipeline::{
    list_protocols, run_pipeline, run_pipeline_text, PipelineError, ResultDocument, RunArtifacts,
    RunOverrides,
};
pub use protocols::TimeGrid;
pub use qubit::{AxisAngles, BlochVector};
