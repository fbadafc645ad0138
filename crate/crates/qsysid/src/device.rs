//! Shot-level simulation of the initialize-evolve-measure loop, and the counts
//! tables that are the only thing the identification protocols get to see.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolve::{LindbladPropagator, UnitaryPropagator};
use crate::linalg;
use crate::operators::{
    ControlSetting, ControlledHamiltonian, DensityMatrix, HermitianOperator, LindbladDissipator,
};
use crate::subspace;
use crate::tol;

/// A measurable quantity with its spectral data; degenerate eigenvalues share
/// one projector, so their outcomes are indistinguishable.
#[derive(Clone, Debug)]
pub struct Observable {
    operator: HermitianOperator,
    values: Vec<f64>,
    projectors: Vec<DMatrix<Complex64>>,
}

impl Observable {
    /// Groups the spectrum into distinct outcomes, with eigenvalues closer
    /// than the degeneracy gap treated as one outcome.
    pub fn new(operator: HermitianOperator) -> Result<Self> {
        let (raw, vectors) = operator.eigen();
        let dim = operator.dim();
        let mut values = Vec::new();
        let mut projectors = Vec::new();
        let mut start = 0;
        while start < dim {
            let mut end = start + 1;
            while end < dim && raw[end - 1] - raw[end] <= tol::DEGENERACY_GAP {
                end += 1;
            }
            let mut projector = DMatrix::<Complex64>::zeros(dim, dim);
            for k in start..end {
                let v = vectors.column(k);
                projector += &v * v.adjoint();
            }
            values.push(raw[start..end].iter().sum::<f64>() / (end - start) as f64);
            projectors.push(linalg::hermitize(&projector));
            start = end;
        }
        let obs = Self { operator, values, projectors };
        obs.check_reconstruction()?;
        Ok(obs)
    }

    /// An observable diagonal in the computational basis: basis state `|i>`
    /// yields `values[i]`, with equal values lumped into one outcome.
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        let dim = values.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch("observable needs at least one eigenvalue".into()));
        }
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let mut grouped_values = Vec::new();
        let mut projectors = Vec::new();
        let mut members: Vec<usize> = Vec::new();
        let mut snapped = vec![0.0; dim];
        let mut pos = 0;
        while pos < dim {
            members.clear();
            members.push(order[pos]);
            let mut end = pos + 1;
            while end < dim
                && values[order[end - 1]] - values[order[end]] <= tol::DEGENERACY_GAP
            {
                members.push(order[end]);
                end += 1;
            }
            let mean = members.iter().map(|&i| values[i]).sum::<f64>() / members.len() as f64;
            let mut projector = DMatrix::<Complex64>::zeros(dim, dim);
            for &i in &members {
                projector[(i, i)] = linalg::ONE;
                snapped[i] = mean;
            }
            grouped_values.push(mean);
            projectors.push(projector);
            pos = end;
        }
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (i, &v) in snapped.iter().enumerate() {
            m[(i, i)] = linalg::cplx(v);
        }
        Ok(Self { operator: HermitianOperator::new(m)?, values: grouped_values, projectors })
    }

    /// The standard two-outcome qubit readout: `|0> -> +1`, `|1> -> -1`.
    pub fn sigma_z() -> Self {
        Self::from_eigenvalues(&[1.0, -1.0]).expect("two distinct eigenvalues")
    }

    fn check_reconstruction(&self) -> Result<()> {
        let dim = self.dim();
        let mut rebuilt = DMatrix::<Complex64>::zeros(dim, dim);
        let mut resolution = DMatrix::<Complex64>::zeros(dim, dim);
        for (v, p) in self.values.iter().zip(&self.projectors) {
            rebuilt += p * linalg::cplx(*v);
            resolution += p;
        }
        let defect = linalg::max_abs(&(rebuilt - self.operator.entries()))
            .max(linalg::max_abs(&(resolution - linalg::identity(dim))));
        if defect > tol::EIGEN_RECONSTRUCTION {
            return Err(Error::SpectralReconstruction(defect));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    /// Distinct outcome values, descending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_outcomes(&self) -> usize {
        self.values.len()
    }

    pub fn projector(&self, outcome: usize) -> &DMatrix<Complex64> {
        &self.projectors[outcome]
    }
}

/// One projective measurement result with the collapsed state it leaves behind.
pub struct MeasurementOutcome {
    pub value: f64,
    pub index: usize,
    pub post_state: DensityMatrix,
}

/// Draws one outcome with Born probabilities and collapses the state onto the
/// corresponding eigenspace.
pub fn sample_measurement(
    rho: &DensityMatrix,
    observable: &Observable,
    rng: &mut impl Rng,
) -> Result<MeasurementOutcome> {
    if rho.dim() != observable.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has dim {}, observable has {}",
            rho.dim(),
            observable.dim()
        )));
    }
    let probs = outcome_probabilities(rho.entries(), &observable.projectors)?;
    let index = draw_categorical(rng, &probs);
    let collapsed = collapse(rho.entries(), observable.projector(index), probs[index]);
    Ok(MeasurementOutcome {
        value: observable.values[index],
        index,
        post_state: DensityMatrix::from_evolution(collapsed)?,
    })
}

/// Counts of (first outcome, second outcome) pairs over a batch of experiments.
#[derive(Clone, Debug)]
pub struct CountsTable {
    values: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
    complement_lumped: bool,
}

impl CountsTable {
    pub(crate) fn from_counts(values: Vec<f64>, counts: Vec<u64>, complement_lumped: bool) -> Self {
        assert_eq!(values.len() * values.len(), counts.len());
        let total = counts.iter().sum();
        Self { values, counts, total, complement_lumped }
    }

    /// Builds a table from counts indexed row-major by (first, second)
    /// outcome, for device implementations backed by recorded data.
    pub fn new(values: Vec<f64>, counts: Vec<u64>, complement_lumped: bool) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidPlan("counts table needs at least one outcome".into()));
        }
        if values.len() * values.len() != counts.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} outcomes need {} joint counts, got {}",
                values.len(),
                values.len() * values.len(),
                counts.len()
            )));
        }
        Ok(Self::from_counts(values, counts, complement_lumped))
    }

    pub fn n_outcomes(&self) -> usize {
        self.values.len()
    }

    /// Outcome values; plain labels rather than eigenvalues when the
    /// complement of a subspace was lumped into the last outcome.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count(&self, first: usize, second: usize) -> u64 {
        self.counts[first * self.values.len() + second]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Whether the last outcome stands for "anywhere outside the subspace".
    pub fn complement_lumped(&self) -> bool {
        self.complement_lumped
    }

    pub fn first_outcome_total(&self, first: usize) -> u64 {
        (0..self.n_outcomes()).map(|b| self.count(first, b)).sum()
    }

    pub fn second_outcome_total(&self, second: usize) -> u64 {
        (0..self.n_outcomes()).map(|a| self.count(a, second)).sum()
    }
}

/// Timed evolution under a named control, standing in for an abstract gate:
/// the duration is angle over rotation rate.
#[derive(Clone, Debug)]
pub struct PrepareStep {
    pub control: ControlSetting,
    pub angle: f64,
    pub rotation_rate: f64,
}

impl PrepareStep {
    pub fn new(control: ControlSetting, angle: f64, rotation_rate: f64) -> Result<Self> {
        if !angle.is_finite() || angle < 0.0 {
            return Err(Error::InvalidPlan(format!("prepare angle {angle} must be finite and >= 0")));
        }
        if !rotation_rate.is_finite() || rotation_rate <= 0.0 {
            return Err(Error::InvalidPlan(format!(
                "prepare rotation rate {rotation_rate} must be finite and > 0"
            )));
        }
        Ok(Self { control, angle, rotation_rate })
    }

    pub fn duration(&self) -> f64 {
        self.angle / self.rotation_rate
    }
}

/// One batch of identical experiments: control, evolution time, shot count,
/// seed, and an optional prepare rotation between the two measurements.
#[derive(Clone, Debug)]
pub struct ShotPlan {
    pub control: ControlSetting,
    pub evolve_time: f64,
    pub shots: u64,
    pub seed: u64,
    pub prepare: Option<PrepareStep>,
}

impl ShotPlan {
    pub fn new(control: ControlSetting, evolve_time: f64, shots: u64, seed: u64) -> Result<Self> {
        if !evolve_time.is_finite() || evolve_time < 0.0 {
            return Err(Error::InvalidPlan(format!(
                "evolve time {evolve_time} must be finite and >= 0"
            )));
        }
        if shots == 0 {
            return Err(Error::InvalidPlan("shot count must be at least 1".into()));
        }
        Ok(Self { control, evolve_time, shots, seed, prepare: None })
    }

    pub fn with_prepare(mut self, prepare: PrepareStep) -> Self {
        self.prepare = Some(prepare);
        self
    }
}

/// The experiment interface the identification protocols are allowed to use.
pub trait Device: Sync {
    /// Initialize by measuring, optionally prepare, evolve, measure again;
    /// counts are indexed by (first outcome, second outcome).
    fn run_experiment_batch(&self, plan: &ShotPlan) -> Result<CountsTable>;

    /// Same loop with a coarser detector: it resolves the computational basis
    /// states spanning the given subspace and lumps everything else into one
    /// final outcome.
    fn run_three_outcome_batch(
        &self,
        subspace_projector: &HermitianOperator,
        plan: &ShotPlan,
    ) -> Result<CountsTable>;
}

/// Simulated N-level device: a controlled Hamiltonian family, an optional
/// dissipator, a fixed readout observable, and the state found before the
/// first measurement of each experiment.
#[derive(Clone, Debug)]
pub struct DeviceModel {
    hamiltonians: ControlledHamiltonian,
    dissipator: LindbladDissipator,
    observable: Observable,
    pre_measurement_state: DensityMatrix,
}

impl DeviceModel {
    pub fn new(
        hamiltonians: ControlledHamiltonian,
        dissipator: LindbladDissipator,
        observable: Observable,
        pre_measurement_state: DensityMatrix,
    ) -> Result<Self> {
        let dim = hamiltonians.dim();
        if observable.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "observable dim {} does not match Hamiltonian dim {dim}",
                observable.dim()
            )));
        }
        if pre_measurement_state.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "pre-measurement state dim {} does not match Hamiltonian dim {dim}",
                pre_measurement_state.dim()
            )));
        }
        if let Some(d) = dissipator.dim() {
            if d != dim {
                return Err(Error::DimensionMismatch(format!(
                    "dissipator dim {d} does not match Hamiltonian dim {dim}"
                )));
            }
        }
        Ok(Self { hamiltonians, dissipator, observable, pre_measurement_state })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonians.dim()
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn hamiltonians(&self) -> &ControlledHamiltonian {
        &self.hamiltonians
    }

    fn joint_distribution(
        &self,
        plan: &ShotPlan,
        projectors: &[DMatrix<Complex64>],
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let h = self.hamiltonians.resolve(&plan.control)?;
        let evolve = Channel::new(&h, &self.dissipator, plan.evolve_time)?;
        let prepare = match &plan.prepare {
            Some(step) => {
                let hp = self.hamiltonians.resolve(&step.control)?;
                Some(Channel::new(&hp, &self.dissipator, step.duration())?)
            }
            None => None,
        };

        let n = projectors.len();
        let first_probs = outcome_probabilities(self.pre_measurement_state.entries(), projectors)?;
        let mut second_probs: Vec<Vec<f64>> = vec![Vec::new(); n];
        for a in 0..n {
            if first_probs[a] <= 0.0 {
                continue;
            }
            let mut rho =
                collapse(self.pre_measurement_state.entries(), &projectors[a], first_probs[a]);
            if let Some(channel) = &prepare {
                rho = channel.apply(&rho);
            }
            rho = linalg::hermitize(&evolve.apply(&rho));
            second_probs[a] = outcome_probabilities(&rho, projectors)?;
        }
        Ok((first_probs, second_probs))
    }

    fn run_batch(
        &self,
        plan: &ShotPlan,
        values: Vec<f64>,
        projectors: &[DMatrix<Complex64>],
        complement_lumped: bool,
    ) -> Result<CountsTable> {
        let (first_probs, second_probs) = self.joint_distribution(plan, projectors)?;
        let n = projectors.len();
        let mut counts = vec![0u64; n * n];
        for shot in 0..plan.shots {
            let mut rng = shot_rng(plan.seed, shot);
            let a = draw_categorical(&mut rng, &first_probs);
            let b = draw_categorical(&mut rng, &second_probs[a]);
            counts[a * n + b] += 1;
        }
        Ok(CountsTable::from_counts(values, counts, complement_lumped))
    }

    fn three_outcome_projectors(
        &self,
        subspace_projector: &HermitianOperator,
    ) -> Result<(Vec<f64>, Vec<DMatrix<Complex64>>)> {
        let dim = self.dim();
        if subspace_projector.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "subspace projector dim {} does not match device dim {dim}",
                subspace_projector.dim()
            )));
        }
        subspace::validate_projector(subspace_projector)?;
        let inside = basis_indices_of_projector(subspace_projector)?;
        let mut projectors: Vec<DMatrix<Complex64>> = inside
            .iter()
            .map(|&i| {
                let mut p = DMatrix::<Complex64>::zeros(dim, dim);
                p[(i, i)] = linalg::ONE;
                p
            })
            .collect();
        projectors.push(linalg::identity(dim) - subspace_projector.entries());
        let values: Vec<f64> = (0..projectors.len()).map(|k| k as f64).collect();
        Ok((values, projectors))
    }
}

impl Device for DeviceModel {
    fn run_experiment_batch(&self, plan: &ShotPlan) -> Result<CountsTable> {
        self.run_batch(
            plan,
            self.observable.values.clone(),
            &self.observable.projectors,
            false,
        )
    }

    fn run_three_outcome_batch(
        &self,
        subspace_projector: &HermitianOperator,
        plan: &ShotPlan,
    ) -> Result<CountsTable> {
        let (values, projectors) = self.three_outcome_projectors(subspace_projector)?;
        self.run_batch(plan, values, &projectors, true)
    }
}

/// Deterministic stand-in for a sampling device: each batch returns the
/// expected counts (joint probabilities times the shot budget, rounded), so
/// estimates carry no shot noise beyond that rounding.
pub struct ExpectationDevice<'a> {
    model: &'a DeviceModel,
}

impl<'a> ExpectationDevice<'a> {
    pub fn new(model: &'a DeviceModel) -> Self {
        Self { model }
    }

    fn expected_counts(
        &self,
        plan: &ShotPlan,
        values: Vec<f64>,
        projectors: &[DMatrix<Complex64>],
        complement_lumped: bool,
    ) -> Result<CountsTable> {
        let (first_probs, second_probs) = self.model.joint_distribution(plan, projectors)?;
        let n = projectors.len();
        let mut counts = vec![0u64; n * n];
        for a in 0..n {
            if second_probs[a].is_empty() {
                continue;
            }
            for b in 0..n {
                let expected = first_probs[a] * second_probs[a][b] * plan.shots as f64;
                counts[a * n + b] = expected.round() as u64;
            }
        }
        Ok(CountsTable::from_counts(values, counts, complement_lumped))
    }
}

impl Device for ExpectationDevice<'_> {
    fn run_experiment_batch(&self, plan: &ShotPlan) -> Result<CountsTable> {
        self.expected_counts(
            plan,
            self.model.observable.values.clone(),
            &self.model.observable.projectors,
            false,
        )
    }

    fn run_three_outcome_batch(
        &self,
        subspace_projector: &HermitianOperator,
        plan: &ShotPlan,
    ) -> Result<CountsTable> {
        let (values, projectors) = self.model.three_outcome_projectors(subspace_projector)?;
        self.expected_counts(plan, values, &projectors, true)
    }
}

/// Propagation over a fixed duration, computed once per batch.
enum Channel {
    Unitary(DMatrix<Complex64>),
    Open { map: DMatrix<Complex64>, dim: usize },
}

impl Channel {
    fn new(h: &HermitianOperator, dissipator: &LindbladDissipator, t: f64) -> Result<Self> {
        if dissipator.is_empty() {
            Ok(Channel::Unitary(UnitaryPropagator::new(h).matrix_at(t)))
        } else {
            let prop = LindbladPropagator::new(h, dissipator)?;
            Ok(Channel::Open { map: prop.exponential(t), dim: h.dim() })
        }
    }

    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        match self {
            Channel::Unitary(u) => u * rho * u.adjoint(),
            Channel::Open { map, dim } => linalg::unvec(&(map * linalg::vec_of(rho)), *dim),
        }
    }
}

fn basis_indices_of_projector(p: &HermitianOperator) -> Result<Vec<usize>> {
    let m = p.entries();
    let dim = p.dim();
    let mut inside = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            if i != j && m[(i, j)].norm() > tol::PROJECTOR {
                return Err(Error::NotProjector(
                    "three-outcome readout needs a subspace spanned by computational basis states"
                        .into(),
                ));
            }
        }
        let d = m[(i, i)].re;
        if (d - 1.0).abs() <= tol::PROJECTOR {
            inside.push(i);
        } else if d.abs() > tol::PROJECTOR {
            return Err(Error::NotProjector(format!(
                "diagonal entry {d} at index {i} is neither 0 nor 1"
            )));
        }
    }
    if inside.is_empty() {
        return Err(Error::NotProjector("subspace projector is zero".into()));
    }
    Ok(inside)
}

fn outcome_probabilities(
    rho: &DMatrix<Complex64>,
    projectors: &[DMatrix<Complex64>],
) -> Result<Vec<f64>> {
    let mut probs: Vec<f64> =
        projectors.iter().map(|p| (p * rho).trace().re.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if total <= 1e-12 {
        return Err(Error::VanishingProbabilities);
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

fn collapse(rho: &DMatrix<Complex64>, projector: &DMatrix<Complex64>, prob: f64) -> DMatrix<Complex64> {
    (projector * rho * projector) / linalg::cplx(prob)
}

fn draw_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = k;
        acc += p;
        if u < acc {
            return k;
        }
    }
    last
}

/// One independent random stream per shot: identical results no matter how a
/// batch is scheduled.
fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// Mixes a base seed with an index into a decorrelated 64-bit seed, so grids
/// of plans can share one user-facing seed.
pub fn derive_stream_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Conditioned expectation estimate assembled from a two-outcome counts table.
pub struct ZEstimate {
    pub z_hat: f64,
    pub conditioned_shots: u64,
}

/// (lambda_0 N_00 + lambda_1 N_01) / (N_00 + N_01); with `symmetrize`, shots
/// whose first outcome was lambda_1 contribute with flipped signs, which is
/// valid whenever the evolution is linear on expectation values and the two
/// outcome values are opposite.
pub fn estimate_z(counts: &CountsTable, symmetrize: bool) -> Result<ZEstimate> {
    if counts.complement_lumped() || counts.n_outcomes() != 2 {
        return Err(Error::OutcomeValuesUnsuitable);
    }
    let (l0, l1) = (counts.values()[0], counts.values()[1]);
    let (n00, n01) = (counts.count(0, 0) as f64, counts.count(0, 1) as f64);
    let (n10, n11) = (counts.count(1, 0) as f64, counts.count(1, 1) as f64);
    let (numerator, denominator) = if symmetrize {
        if (l0 + l1).abs() > 1e-12 * l0.abs().max(l1.abs()).max(1.0) {
            return Err(Error::OutcomeValuesUnsuitable);
        }
        (l0 * n00 + l1 * n01 - l0 * n10 - l1 * n11, n00 + n01 + n10 + n11)
    } else {
        (l0 * n00 + l1 * n01, n00 + n01)
    };
    if denominator < 1.0 {
        return Err(Error::NoConditionedShots(
            "no experiments started in the conditioning outcome".into(),
        ));
    }
    Ok(ZEstimate { z_hat: numerator / denominator, conditioned_shots: denominator as u64 })
}
