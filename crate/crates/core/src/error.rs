use std::fmt;

use crate::graph::NodeId;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// One node whose incoming weights do not sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSumIssue {
    pub node: NodeId,
    pub label: String,
    pub sum: f64,
}

/// Collected freeze-time validation failures. Reports every offending node,
/// not just the first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub weight_sums: Vec<WeightSumIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.weight_sums.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "graph validation failed:")?;
        for issue in &self.weight_sums {
            writeln!(
                f,
                "  node {} ({:?}): incoming weights sum to {}, expected 1",
                issue.node, issue.label, issue.sum
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge {a} -> {b}")]
    DuplicateEdge { a: NodeId, b: NodeId },
    #[error("self-loop rejected on node {0}")]
    SelfLoop(NodeId),
    #[error("edge {a} -> {b} has weight {weight}, outside [0, 1]")]
    WeightOutOfRange {
        a: NodeId,
        b: NodeId,
        weight: f64,
    },
    #[error("operation requires a frozen graph")]
    NotFrozen,
    #[error("graph is frozen; structural edits are no longer allowed")]
    Frozen,
    #[error("{0}")]
    Validation(ValidationReport),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sector {sector}: no path between {from:?} and {to:?}")]
    UnreachablePath {
        sector: String,
        from: String,
        to: String,
    },
    #[error(
        "sector {sector}: multiple shortest paths between {from:?} and {to:?}; \
         declare the path explicitly"
    )]
    AmbiguousPath {
        sector: String,
        from: String,
        to: String,
    },
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("{what} failed to converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },
    #[error("graph has {nodes} nodes; need more than {stop_at} to run an attack")]
    GraphTooSmall { nodes: usize, stop_at: usize },
    #[error("invalid attack plan: {0}")]
    InvalidPlan(String),
    #[error("no candidate nodes with in-degree >= 2; nothing to optimize")]
    NoCandidateNodes,
    #[error("{count} assignments exceed the exhaustive cap of {cap}; use sampling mode")]
    CapExceeded { count: u128, cap: u128 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}
