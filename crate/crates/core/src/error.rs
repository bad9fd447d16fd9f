use thiserror::Error;

/// Errors raised across the collocation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate domain map at x = ({x0}, {x1}), y = {y:?}: {reason}")]
    DegenerateMap {
        x0: f64,
        x1: f64,
        y: Vec<f64>,
        reason: String,
    },

    #[error("assumption violated: delta_tilde = {delta_tilde} <= 0 (worst point ({x0}, {x1}))")]
    AssumptionViolated { delta_tilde: f64, x0: f64, x1: f64 },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("node {node} (y = {y:?}) failed: {source}")]
    Node {
        node: usize,
        y: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible analyticity region: {0}")]
    InfeasibleRegion(String),

    #[error("missing sample for grid node {0}")]
    MissingSample(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
