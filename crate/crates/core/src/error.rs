use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a DAG: the graph contains a directed cycle")]
    NotADag,

    #[error("graph has {0} nodes; at most {max} are supported", max = crate::dag::MAX_NODES)]
    TooManyNodes(usize),

    #[error("node index {node} out of range for a graph on {d} nodes")]
    NodeOutOfRange { node: usize, d: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("incompatible partition: {0}")]
    IncompatiblePartition(String),

    #[error("infeasible partition: {0}")]
    InfeasiblePartition(String),

    #[error("incompatible (z, rho): edge {from} -> {to} does not go to a higher class")]
    IncompatibleOrdering { from: usize, to: usize },

    #[error("joint marginalization over class orderings requires a constant beta policy")]
    NonConstantBeta,

    #[error("illegal edge {from} -> {to}: {reason}")]
    IllegalEdge {
        from: usize,
        to: usize,
        reason: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
