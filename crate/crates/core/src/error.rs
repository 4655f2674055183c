use std::path::PathBuf;

use thiserror::Error;

/// Diagnostic attached to an iterative solve that ran out of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverFailure {
    pub label: &'static str,
    pub iterations: usize,
    pub rhs_norm: f64,
    /// Residual norm after every iteration, starting with the initial residual.
    pub residual_history: Vec<f64>,
}

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let last = self.residual_history.last().copied().unwrap_or(f64::NAN);
        write!(
            f,
            "{} did not converge after {} iterations (residual {:.3e}, rhs {:.3e})",
            self.label, self.iterations, last, self.rhs_norm
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field size mismatch: expected {expected} values, got {got}")]
    FieldShape { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("coefficient must be strictly positive, found {value} at node {node}")]
    CoefficientNotPositive { node: usize, value: f64 },

    #[error("unknown coefficient id `{0}`")]
    UnknownCoefficient(String),

    #[error("coefficient `{which}` does not provide derivative order {order}")]
    UnsupportedDerivative { which: &'static str, order: u8 },

    #[error("invalid material parameters: {0}")]
    InvalidMaterial(String),

    #[error("displacement problem needs at least one Dirichlet edge")]
    NoDirichletBoundary,

    #[error("{0}")]
    Solver(SolverFailure),

    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("strain rate is required when the visco-elastic term is active")]
    MissingStrainRate,

    #[error("grid {nx}x{ny} exceeds the dense oracle limit of {limit}x{limit}")]
    GridTooLarge { nx: usize, ny: usize, limit: usize },

    #[error("weight matrix is not symmetric positive definite")]
    IndefiniteWeight,

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invalid stepper configuration: {0}")]
    InvalidStepper(String),

    #[error("Picard iteration failed at t = {t:.6e} after {shrinks} window shrinks (last dt {dt:.3e})")]
    PicardFailure { t: f64, dt: f64, shrinks: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<SolverFailure> for Error {
    fn from(f: SolverFailure) -> Self {
        Error::Solver(f)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
