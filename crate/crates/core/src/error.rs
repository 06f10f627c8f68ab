use thiserror::Error;

use crate::spectral::SteadyState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate wavenumber pair: n = k = {0}")]
    DegeneratePair(f64),

    #[error("kernel is singular at x = {0}")]
    Singularity(f64),

    #[error("quadrature accuracy {achieved:e} above requested {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },

    #[error("not found: {0}")]
    NotFound(String),

    /// Newton did not reach the tolerance; carries the norm history and last iterate.
    #[error("Newton iteration failed after {iterations} iterations (last residual {last_norm:e})")]
    NewtonFailure {
        iterations: usize,
        last_norm: f64,
        history: Vec<f64>,
        last: Option<Box<SteadyState>>,
    },

    #[error("singular linear system near a bifurcation point ({0})")]
    NearBifurcation(String),

    #[error("degenerate expansion: {0}")]
    DegenerateExpansion(String),

    #[error("predictor unavailable: {0}")]
    PredictorUnavailable(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
