//! Error types shared across the crate.
//!
//! [`Error`] covers domain and convergence failures; [`FileError`] covers
//! malformed input files. The CLI maps them to exit codes 1 and 2.

use thiserror::Error;

/// Domain, validation, or convergence failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is singular or nearly singular (|det| = {det:e})")]
    Singular { det: f64 },

    #[error("matrix is not in the span of the algebra basis (residual {residual:e})")]
    NotInSpan { residual: f64 },

    #[error("subspace spanned by e_1..e_{rank} is not bracket-generating (reached rank {achieved} of {dim})")]
    NotBracketGenerating {
        rank: usize,
        achieved: usize,
        dim: usize,
    },

    #[error("representation does not reproduce the structure constants: [E_{i},E_{j}] residual {residual:e}")]
    RepresentationInconsistent { i: usize, j: usize, residual: f64 },

    #[error("structure constants fail validation: {0}")]
    InvalidStructureConstants(String),

    #[error("matrix logarithm outside the principal branch")]
    OutsidePrincipalBranch,

    #[error("chart inversion did not converge after {iterations} iterations (residual {residual:e})")]
    ChartInversionFailed { iterations: usize, residual: f64 },

    #[error("costate is not normalized: |u(0)| = {speed} (pass the allow-speed flag to accept)")]
    UnnormalizedCostate { speed: f64 },

    #[error("geodesic vector field vanishes at the start point (|u(g0)| = {norm:e})")]
    ZeroField { norm: f64 },

    #[error("trajectories are on different time grids")]
    GridMismatch,

    #[error("integration aborted at t = {t}: state is not finite")]
    NonFiniteState { t: f64 },

    #[error("steering failed: best endpoint residual {best_residual:e}")]
    SteeringFailed { best_residual: f64 },

    #[error("angle unwrap jump of {jump} rad exceeds the per-step limit {limit} rad; decrease the step size")]
    UnwrapJump { jump: f64, limit: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("group element does not match the model's structural template (residual {residual:e})")]
    StructuralResidual { residual: f64 },

    #[error("non-finite value in input")]
    NonFiniteInput,
}

/// Failure to parse or decode an input file.
#[derive(Debug, Error)]
pub enum FileError {
    #[error("JSON parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed {format} file, line {line}: {message}")]
    Malformed {
        format: &'static str,
        line: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl FileError {
    pub fn malformed(format: &'static str, line: usize, message: impl Into<String>) -> Self {
        FileError::Malformed {
            format,
            line,
            message: message.into(),
        }
    }
}
