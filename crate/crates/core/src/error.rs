use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly produced a non-finite value in cell {cell}")]
    NonFiniteAssembly { cell: usize },

    #[error("no active degrees of freedom: the fluid domain does not overlap the grid")]
    EmptyActiveSet,

    #[error("linear solver breakdown: {reason} (after {newton_iterations} Newton iterations, residual trace {trace:?})")]
    LinearSolver {
        reason: String,
        newton_iterations: usize,
        trace: Vec<f64>,
    },

    #[error("Newton iteration did not converge in {iterations} iterations (last residual {last_residual:e})")]
    Divergence { iterations: usize, last_residual: f64 },

    #[error("insufficient cycles: found {crossings} upward zero crossings, need at least 3")]
    InsufficientCycles { crossings: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
