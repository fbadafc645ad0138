//! States, Hermitian operators, dissipators, and controlled Hamiltonian families.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tol;

/// Hermitian N x N operator, checked for conjugate symmetry at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let (defect, (i, j)) = linalg::hermiticity_defect(&entries);
        if defect > tol::HERMITIAN {
            return Err(Error::NotHermitian(format!(
                "entries ({i},{j}) and ({j},{i}) differ from conjugates by {defect:.3e}"
            )));
        }
        Ok(Self { entries })
    }

    /// Builds a real symmetric operator from row-major entries.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} real entries for dim {dim}, got {}",
                dim * dim,
                rows.len()
            )));
        }
        let m = DMatrix::from_row_iterator(dim, dim, rows.iter().map(|&x| linalg::cplx(x)));
        Self::new(m)
    }

    pub fn zero(dim: usize) -> Self {
        Self { entries: DMatrix::zeros(dim, dim) }
    }

    /// Sum of Hermitian operators scaled by real weights; used to evaluate control families.
    pub(crate) fn weighted_sum(base: &Self, terms: &[(f64, &Self)]) -> Self {
        let mut entries = base.entries.clone();
        for (w, op) in terms {
            entries += &op.entries * linalg::cplx(*w);
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.entries)
    }

    /// Eigenvalues (descending) and the matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        linalg::hermitian_eigen(&self.entries)
    }
}

/// Density operator: Hermitian, unit trace, positive semidefinite within tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let (defect, (i, j)) = linalg::hermiticity_defect(&entries);
        if defect > tol::HERMITIAN {
            return Err(Error::NotHermitian(format!(
                "density entries ({i},{j}) and ({j},{i}) differ from conjugates by {defect:.3e}"
            )));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > tol::TRACE || tr.im.abs() > tol::TRACE {
            return Err(Error::InvalidState(format!("trace is {tr}, must be 1")));
        }
        let (eigenvalues, _) = linalg::hermitian_eigen(&entries);
        if let Some(min) = eigenvalues.last() {
            if *min < tol::EIGENVALUE_FLOOR {
                return Err(Error::InvalidState(format!("minimum eigenvalue {min:.3e} is negative")));
            }
        }
        Ok(Self { entries })
    }

    /// Wraps a matrix produced by a trace-preserving map, hermitizing away rounding noise.
    pub(crate) fn from_evolution(entries: DMatrix<Complex64>) -> Result<Self> {
        Self::new(linalg::hermitize(&entries))
    }

    /// The basis state |k><k|.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::DimensionMismatch(format!("basis index {k} outside dim {dim}")));
        }
        let mut entries = DMatrix::zeros(dim, dim);
        entries[(k, k)] = linalg::ONE;
        Ok(Self { entries })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { entries: DMatrix::identity(dim, dim) * linalg::cplx(1.0 / dim as f64) }
    }

    /// Pure state from an amplitude vector, normalized if needed.
    pub fn from_state_vector(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm < 1e-14 {
            return Err(Error::InvalidState("state vector has zero norm".into()));
        }
        let psi = psi / linalg::cplx(norm);
        Ok(Self { entries: &psi * psi.adjoint() })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.entries)
    }

    /// Tr(rho^2), one for pure states and 1/N for the maximally mixed state.
    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }
}

/// One dissipation channel: a rate and a jump operator.
#[derive(Clone, Debug)]
pub struct DissipationTerm {
    rate: f64,
    operator: DMatrix<Complex64>,
}

impl DissipationTerm {
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn operator(&self) -> &DMatrix<Complex64> {
        &self.operator
    }
}

/// Markovian dissipator: a sum of channels, optionally conjugated by a fixed unitary.
#[derive(Clone, Debug, Default)]
pub struct LindbladDissipator {
    terms: Vec<DissipationTerm>,
    basis_change: Option<DMatrix<Complex64>>,
}

impl LindbladDissipator {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(terms: Vec<(f64, DMatrix<Complex64>)>) -> Result<Self> {
        let mut dim: Option<usize> = None;
        for (rate, op) in &terms {
            if *rate < 0.0 {
                return Err(Error::NegativeRate(*rate));
            }
            if !op.is_square() || op.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "jump operator must be square and nonempty, got {}x{}",
                    op.nrows(),
                    op.ncols()
                )));
            }
            match dim {
                None => dim = Some(op.nrows()),
                Some(d) if d != op.nrows() => {
                    return Err(Error::DimensionMismatch(format!(
                        "jump operators mix dims {d} and {}",
                        op.nrows()
                    )))
                }
                _ => {}
            }
        }
        if let Some(d) = dim {
            let max = d * d - 1;
            if terms.len() > max {
                return Err(Error::TooManyDissipatorTerms { got: terms.len(), max, dim: d });
            }
        }
        Ok(Self {
            terms: terms.into_iter().map(|(rate, operator)| DissipationTerm { rate, operator }).collect(),
            basis_change: None,
        })
    }

    /// Qubit dephasing channel with jump operator sigma_z / 2.
    pub fn pure_dephasing(gamma: f64) -> Result<Self> {
        Self::new(vec![(gamma, crate::qubit::sigma_z() * linalg::cplx(0.5))])
    }

    /// Qubit relaxation with separate rates toward the first and second basis state.
    pub fn relaxation(rate_toward_0: f64, rate_toward_1: f64) -> Result<Self> {
        let mut lower = DMatrix::zeros(2, 2);
        lower[(0, 1)] = linalg::ONE;
        let mut raise = DMatrix::zeros(2, 2);
        raise[(1, 0)] = linalg::ONE;
        Self::new(vec![(rate_toward_0, lower), (rate_toward_1, raise)])
    }

    /// Conjugates every jump operator by a fixed unitary, V -> U V U^dagger.
    pub fn with_basis_change(mut self, u: DMatrix<Complex64>) -> Result<Self> {
        if let Some(d) = self.dim() {
            if u.nrows() != d || u.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "basis change is {}x{}, dissipator dim is {d}",
                    u.nrows(),
                    u.ncols()
                )));
            }
        }
        if !linalg::is_unitary_within(&u, tol::UNITARY) {
            return Err(Error::NotUnitary("basis change fails U^dagger U = I".into()));
        }
        self.basis_change = Some(u);
        Ok(self)
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.terms.first().map(|t| t.operator.nrows())
    }

    pub fn terms(&self) -> &[DissipationTerm] {
        &self.terms
    }

    pub fn basis_change(&self) -> Option<&DMatrix<Complex64>> {
        self.basis_change.as_ref()
    }

    /// Jump operators with the basis change applied.
    pub fn effective_operators(&self) -> Vec<(f64, DMatrix<Complex64>)> {
        self.terms
            .iter()
            .map(|t| {
                let op = match &self.basis_change {
                    Some(u) => u * &t.operator * u.adjoint(),
                    None => t.operator.clone(),
                };
                (t.rate, op)
            })
            .collect()
    }
}

/// How a protocol selects one member of a Hamiltonian family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlSetting {
    Vector(Vec<f64>),
    Label(String),
}

impl std::fmt::Display for ControlSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControlSetting::Vector(v) => write!(f, "f = {v:?}"),
            ControlSetting::Label(l) => write!(f, "{l:?}"),
        }
    }
}

/// Family of Hamiltonians indexed by a control: affine in a control vector,
/// or a plain lookup table of labeled operators.
#[derive(Clone, Debug)]
pub enum ControlledHamiltonian {
    Linear { base: HermitianOperator, terms: Vec<HermitianOperator> },
    Table(BTreeMap<String, HermitianOperator>),
}

impl ControlledHamiltonian {
    pub fn linear(base: HermitianOperator, terms: Vec<HermitianOperator>) -> Result<Self> {
        let dim = base.dim();
        for (m, t) in terms.iter().enumerate() {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "control term {m} has dim {}, base has {dim}",
                    t.dim()
                )));
            }
        }
        Ok(Self::Linear { base, terms })
    }

    /// A family with no controls at all: a single fixed Hamiltonian.
    pub fn fixed(h: HermitianOperator) -> Self {
        Self::Linear { base: h, terms: Vec::new() }
    }

    pub fn table(map: BTreeMap<String, HermitianOperator>) -> Result<Self> {
        let mut dims = map.values().map(HermitianOperator::dim);
        let first = dims.next().ok_or_else(|| Error::DimensionMismatch("empty Hamiltonian table".into()))?;
        if dims.any(|d| d != first) {
            return Err(Error::DimensionMismatch("table entries have mixed dims".into()));
        }
        Ok(Self::Table(map))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Linear { base, .. } => base.dim(),
            Self::Table(map) => map.values().next().map_or(0, HermitianOperator::dim),
        }
    }

    /// Number of control components for the affine form, `None` for tables.
    pub fn n_controls(&self) -> Option<usize> {
        match self {
            Self::Linear { terms, .. } => Some(terms.len()),
            Self::Table(_) => None,
        }
    }

    pub fn resolve(&self, setting: &ControlSetting) -> Result<HermitianOperator> {
        match (self, setting) {
            (Self::Linear { base, terms }, ControlSetting::Vector(f)) => {
                if f.len() != terms.len() {
                    return Err(Error::ControlArity { got: f.len(), expected: terms.len() });
                }
                let weighted: Vec<(f64, &HermitianOperator)> =
                    f.iter().copied().zip(terms.iter()).collect();
                Ok(HermitianOperator::weighted_sum(base, &weighted))
            }
            (Self::Table(map), ControlSetting::Label(label)) => {
                map.get(label).cloned().ok_or_else(|| Error::UnknownControl(label.clone()))
            }
            (Self::Linear { .. }, ControlSetting::Label(l)) => Err(Error::ControlKind(format!(
                "affine family takes a control vector, got label {l:?}"
            ))),
            (Self::Table(_), ControlSetting::Vector(_)) => {
                Err(Error::ControlKind("table family takes a control label, got a vector".into()))
            }
        }
    }
}
