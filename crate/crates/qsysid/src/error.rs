//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("dissipation rate {0} is negative")]
    NegativeRate(f64),

    #[error("too many dissipator terms: {got} exceeds the {max} independent channels of a {dim}-level system")]
    TooManyDissipatorTerms { got: usize, max: usize, dim: usize },

    #[error("matrix is not unitary: {0}")]
    NotUnitary(String),

    #[error("operator is not a projector: {0}")]
    NotProjector(String),

    #[error("Bloch vector norm {0} exceeds 1")]
    BlochNormExceeded(f64),

    #[error("rotation axis is degenerate (omega below {})", crate::tol::DEGENERATE_OMEGA)]
    DegenerateAxis,

    #[error("angle {name} = {value} outside {range}")]
    AngleOutOfRange { name: &'static str, value: f64, range: &'static str },

    #[error("unknown control label {0:?}")]
    UnknownControl(String),

    #[error("control vector has {got} components, Hamiltonian has {expected}")]
    ControlArity { got: usize, expected: usize },

    #[error("control setting kind does not match the Hamiltonian form: {0}")]
    ControlKind(String),

    #[error("invalid shot plan: {0}")]
    InvalidPlan(String),

    #[error("observable spectral data reconstructs the operator only to {0:.3e}")]
    SpectralReconstruction(f64),

    #[error("measurement outcome probabilities sum to zero")]
    VanishingProbabilities,

    #[error("no usable shots: {0}")]
    NoConditionedShots(String),

    #[error("counts table has no sign-symmetric outcome pair for expectation estimates")]
    OutcomeValuesUnsuitable,

    #[error("trace needs at least 8 samples, got {0}")]
    TraceTooShort(usize),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("no spectral peak above the noise floor")]
    NoPeak,

    #[error("h0 + 2*h1 = {0} is at or below 1/2, confinement upper bound undefined")]
    ConfinementUndefined(f64),

    #[error("fit did not converge within {iterations} iterations (best residual {residual})")]
    FitDidNotConverge { iterations: usize, residual: f64 },

    #[error("no equatorial landing exists for theta_ref = {0} (requires theta_ref in (pi/4, pi/2])")]
    NoEquatorialLanding(f64),

    #[error("azimuth is unidentifiable: {0}")]
    PhiUnidentifiable(String),

    #[error("rotation frequency undetermined: {0}")]
    OmegaUndetermined(String),

    #[error("estimate inconsistent with stated parameters: {0}")]
    EstimateOutOfRange(String),

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("operation requires a single scalar control, dataset has {0}")]
    ControlArityForFit(usize),

    #[error("polynomial degree {degree} needs more than {rows} rows")]
    DegreeTooHigh { degree: usize, rows: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach a field or entry context to configuration-stage errors.
    pub(crate) fn in_field(self, field: &str) -> Error {
        Error::Config(format!("in `{field}`: {self}"))
    }
}
