//! Core library for interdependent utility network robustness studies.
//!
//! Builds weighted process-dependency graphs from scenario descriptions,
//! runs percolation attacks against them, and reports robustness metrics.

pub mod builder;
pub mod centrality;
pub mod error;
pub mod graph;
pub mod graph_io;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod percolation;

pub use builder::{
    build_graph, build_graph_with, BuildReport, DeliveryProcess, KnowledgeMatrix, ScenarioConfig,
    UtilityTopology,
};
pub use centrality::Basis;
pub use error::{Error, Result};
pub use graph::{NodeId, ProcessGraph, ProcessNode, Sector};
pub use harness::{run_campaign, CampaignOutcome, CampaignSpec, DegradationTable};
pub use metrics::{snapshot, Metric, MetricsSnapshot};
pub use optimizer::{
    candidate_parents, optimize, ObjectiveValue, OptimizationOutcome, OptimizationSpec, SearchMode,
    WeightAssignment,
};
pub use percolation::{
    cascade, run_attack, AttackPlan, PercolationTrace, RankingMode, Selection, StageRecord,
    StepMode, Strength,
};
