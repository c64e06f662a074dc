//! Dense complex linear algebra and quantum-state value types.
//!
//! Everything here is sized for few-qubit work (dimensions up to ~16):
//! matrices are stored row-major in a flat `Vec`, the eigensolver is a
//! cyclic Jacobi iteration, and all values are immutable after
//! construction so they can be shared freely across threads.

mod eig;
mod matrix;
mod state;

pub use eig::{hermitian_eig, operator_norm, psd_sqrt, HermitianEig};
pub use matrix::{pauli_x, pauli_y, pauli_z, CMatrix};
pub use state::{density_from_pure, mix, partial_trace, DensityMatrix, PureState, Side};

use thiserror::Error;

pub use num_complex::Complex64;

/// Numerical tolerances used throughout the kernel.
///
/// These are deliberate constants rather than knobs threaded through
/// every call; the few places where a caller-facing tolerance makes
/// sense (LHV feasibility, protocol verdicts) take an explicit
/// parameter instead.
pub mod tol {
    /// Entrywise Hermiticity tolerance for density matrices.
    pub const HERMITICITY: f64 = 1e-12;
    /// Hermiticity tolerance accepted by the eigensolver.
    pub const EIG_INPUT: f64 = 1e-10;
    /// Unit-trace tolerance for density matrices.
    pub const TRACE: f64 = 1e-12;
    /// Eigenvalues in `[EIGENVALUE_FLOOR, 0)` are treated as zero;
    /// anything below is a genuine positivity violation. The window
    /// absorbs floating-point dust from chained Kraus updates.
    pub const EIGENVALUE_FLOOR: f64 = -1e-8;
    /// Unit-norm tolerance for pure states and Bloch vectors.
    pub const NORM: f64 = 1e-12;
    /// Jacobi sweep convergence: off-diagonal Frobenius mass below this.
    pub const JACOBI_OFF: f64 = 1e-13;
    /// Hard cap on Jacobi sweeps.
    pub const JACOBI_MAX_SWEEPS: usize = 100;
    /// Mixture weights must sum to 1 within this.
    pub const WEIGHT_SUM: f64 = 1e-12;
    /// Completeness residual allowed for a partition of unity.
    pub const COMPLETENESS: f64 = 1e-10;
    /// Branches with probability at or below this carry no post-state.
    pub const ZERO_BRANCH: f64 = 1e-14;
    /// Joint probability tables must sum to 1 within this.
    pub const TABLE_SUM: f64 = 1e-10;
    /// Default LHV feasibility threshold.
    pub const LHV_FEASIBILITY: f64 = 1e-9;
}

/// Errors produced by the linear-algebra kernel.
#[derive(Debug, Error)]
pub enum QcoreError {
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.6e})")]
    NotPsd(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bad mixture weights: {0}")]
    BadWeights(String),
    #[error("non-finite matrix entry at ({0},{1})")]
    NonFinite(usize, usize),
    #[error("state vector has norm {0} (expected 1)")]
    NotNormalized(f64),
    #[error("trace is {0} (expected 1)")]
    BadTrace(f64),
    #[error("Jacobi eigensolver did not converge in {0} sweeps (off-diagonal mass {1:.3e})")]
    EigNoConvergence(usize, f64),
}
