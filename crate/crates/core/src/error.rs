use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum FsiError {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix (zero pivot at index {index})")]
    Singular { index: usize },

    #[error("inverted element: cell {cell} has J = {jacobian:e}")]
    InvertedElement { cell: usize, jacobian: f64 },

    #[error("mesh distortion: |dJ| = {delta:.3} in cell {cell} exceeds 0.5 within one step")]
    MeshDistortion { cell: usize, delta: f64 },

    #[error("Newton did not converge in {iterations} iterations (last residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("non-finite residual encountered")]
    NonFinite,

    #[error("fixed-point iteration did not converge in {iterations} iterations (last increment {increment:e})")]
    FixedPointFailed { iterations: usize, increment: f64 },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<FsiError>,
    },

    #[error("reduced solution diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("unsupported version: {0}")]
    UnsupportedVersion(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FsiError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FsiError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn at_step(self, step: usize) -> Self {
        FsiError::Step {
            step,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            FsiError::Singular { .. }
            | FsiError::InvertedElement { .. }
            | FsiError::MeshDistortion { .. }
            | FsiError::NewtonFailed { .. }
            | FsiError::NonFinite
            | FsiError::FixedPointFailed { .. }
            | FsiError::Diverged { .. } => true,
            FsiError::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, FsiError>;
