use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("simulation produced a non-finite value at node {node} (t = {time}): {what}")]
    NonFinite {
        node: usize,
        time: f64,
        what: &'static str,
    },

    #[error("terminal value {xi} lies below the obstacle {obstacle} (state index {state})")]
    TerminalBelowObstacle { state: usize, xi: f64, obstacle: f64 },

    #[error("penalty scheme unstable: n_penalty * dt = {product} >= 1")]
    PenaltyUnstable { product: f64 },

    #[error("enumeration refused: depth {depth} exceeds the limit of {limit}")]
    EnumerationTooDeep { depth: usize, limit: usize },

    #[error("stopped terminal dominated by the obstacle only up to an overshoot of {overshoot} (> {tolerance}); refine the grid")]
    GridTooCoarse { overshoot: f64, tolerance: f64 },

    #[error("solver invariant broken: {0}")]
    Invariant(String),

    #[error("at epsilon = {epsilon}: {source}")]
    AtEpsilon {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
