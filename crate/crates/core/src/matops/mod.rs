//! Dense matrix operations sized for small control problems.
//!
//! Everything here is written for the dimensions this crate actually meets:
//! per-robot state matrices up to 4x4 and stacked network matrices up to
//! 64x64 (the augmented exponential of a 16-robot, 2-axis system). Plain
//! O(n^3) algorithms with partial pivoting are accurate and fast at these
//! sizes.

mod decomp;
mod eig;
mod expm;
mod matrix;
mod riccati;

pub use decomp::{cholesky, Lu};
pub use eig::eigenvalues;
pub use expm::{expm, expm_with_integral};
pub use matrix::{kron, Matrix};
pub use riccati::{is_hurwitz, solve_care, solve_lyapunov, CareSolution};

use thiserror::Error;

/// Failure modes of the dense matrix routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatOpsError {
    #[error("{op}: shape mismatch, {left_rows}x{left_cols} against {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not Hurwitz; the Lyapunov system has no stabilizing solution")]
    NonHurwitz,
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
}
