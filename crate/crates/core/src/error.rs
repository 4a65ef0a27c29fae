use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AmotError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AmotError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("triangle id {id} out of range (mesh has {count} triangles)")]
    InvalidTriangle { id: usize, count: usize },

    #[error("functions live on different meshes")]
    MeshMismatch,

    #[error("meshes belong to different refinement hierarchies")]
    HierarchyMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "linear solver did not converge: {reason} after {iterations} iterations (relative residual {residual:.3e})"
    )]
    SolverFailure {
        reason: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular diagonal block in row block {0}")]
    SingularBlock(usize),

    #[error("rosenbrock tableau rejected: {0}")]
    InvalidTableau(String),

    #[error("time step did not converge in {iterations} iterations at t={t}: {estimator} estimator {value:.3e} exceeds tolerance {tol:.3e}")]
    IterationCap {
        iterations: usize,
        t: f64,
        estimator: &'static str,
        value: f64,
        tol: f64,
    },

    #[error("non-finite value in solution at t={0}")]
    NonFinite(f64),

    #[error("config {path}:{line}: {msg}")]
    Config { path: PathBuf, line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

impl AmotError {
    /// Short stable identifier used in machine-readable error lines and FFI status codes.
    pub fn kind(&self) -> &'static str {
        match self {
            AmotError::InvalidArgument(_) => "invalid_argument",
            AmotError::InvalidTriangle { .. } => "invalid_triangle",
            AmotError::MeshMismatch => "mesh_mismatch",
            AmotError::HierarchyMismatch => "hierarchy_mismatch",
            AmotError::DimensionMismatch { .. } => "dimension_mismatch",
            AmotError::SolverFailure { .. } => "solver_failure",
            AmotError::SingularBlock(_) => "singular_block",
            AmotError::InvalidTableau(_) => "invalid_tableau",
            AmotError::IterationCap { .. } => "iteration_cap",
            AmotError::NonFinite(_) => "non_finite",
            AmotError::Config { .. } => "config",
            AmotError::Io { .. } => "io",
            AmotError::SelfCheck(_) => "self_check",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AmotError::Io {
            path: path.into(),
            source,
        }
    }
}
