use thiserror::Error;

use crate::graph::VertexId;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("vertex {0} is out of range")]
    InvalidVertex(VertexId),

    #[error("source vertex {0} is in the failure set")]
    FailedSource(VertexId),

    #[error("query vertex {0} is in the failure set")]
    FailedQueryVertex(VertexId),

    #[error("failure set has {size} vertices but the structure tolerates at most {max}")]
    TooManyFailures { size: usize, max: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("pair ({s}, {t}) is not moderately far: |st| = {dist}, admissible range [{lo}, {hi})")]
    NotModeratelyFar {
        s: VertexId,
        t: VertexId,
        dist: f64,
        lo: f64,
        hi: f64,
    },

    #[error("FT-structure ({u}, {v}, level {level}) exceeded the node cap of {cap}")]
    NodeCapExceeded {
        u: VertexId,
        v: VertexId,
        level: usize,
        cap: usize,
    },

    #[error("edge splitting would add {needed} vertices, over the budget of {budget}")]
    SplitBudgetExceeded { needed: usize, budget: usize },

    #[error("internal consistency violated: {0}")]
    Internal(String),

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;
