//! Numerical tolerances enforced at construction and by the propagators.

/// Largest allowed deviation from conjugate symmetry in a Hermitian matrix.
pub const HERMITIAN: f64 = 1e-12;

/// Largest allowed deviation of a density-matrix trace from one.
pub const TRACE: f64 = 1e-10;

/// Most negative eigenvalue a density matrix may have.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

/// Largest allowed deviation of a projector from idempotency.
pub const PROJECTOR: f64 = 1e-10;

/// Largest allowed deviation of a basis-change matrix from unitarity.
pub const UNITARY: f64 = 1e-10;

/// Largest allowed reconstruction error of an observable from its spectral data.
pub const EIGEN_RECONSTRUCTION: f64 = 1e-10;

/// Eigenvalues closer than this are treated as one degenerate outcome.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Rotation rates below this leave the axis direction undefined.
pub const DEGENERATE_OMEGA: f64 = 1e-12;

/// Slack allowed on the unit-ball constraint for Bloch vectors.
pub const BLOCH_NORM_SLACK: f64 = 1e-10;
