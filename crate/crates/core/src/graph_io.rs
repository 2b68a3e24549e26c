//! CSV serialization for graphs, traces, and centrality scores.
//!
//! Graphs round-trip through a node table (`id,label,sector,qof_fraction`)
//! and an edge list (`source,target,weight`). Files are UTF-8, comma
//! delimited; lines starting with `#` are skipped on read.

use std::io::{Read, Write};
use std::path::Path;

use crate::centrality::Basis;
use crate::error::Result;
use crate::graph::{NodeId, ProcessGraph, ProcessNode, Sector};
use crate::percolation::PercolationTrace;

#[derive(serde::Deserialize)]
struct NodeRow {
    id: u32,
    label: String,
    sector: String,
    qof_fraction: Option<f64>,
}

#[derive(serde::Deserialize)]
struct EdgeRow {
    source: u32,
    target: u32,
    weight: f64,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Reads a node table and edge list and freezes the result.
pub fn read_graph<N: Read, E: Read>(nodes: N, edges: E) -> Result<ProcessGraph> {
    let mut graph = ProcessGraph::new();
    for row in reader(nodes).deserialize() {
        let row: NodeRow = row?;
        let sector: Sector = row.sector.parse()?;
        let mut node = ProcessNode::new(row.id, row.label, sector);
        if let Some(q) = row.qof_fraction {
            node = node.with_qof(q);
        }
        graph.add_node(node)?;
    }
    for row in reader(edges).deserialize() {
        let row: EdgeRow = row?;
        graph.add_edge(NodeId(row.source), NodeId(row.target), row.weight)?;
    }
    graph.freeze()?;
    Ok(graph)
}

/// Reads `nodes.csv` and `edges.csv` from a directory.
pub fn read_graph_dir(dir: impl AsRef<Path>) -> Result<ProcessGraph> {
    let dir = dir.as_ref();
    let nodes = std::fs::File::open(dir.join("nodes.csv"))?;
    let edges = std::fs::File::open(dir.join("edges.csv"))?;
    read_graph(nodes, edges)
}

pub fn write_nodes<W: Write>(graph: &ProcessGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "label", "sector", "qof_fraction"])?;
    for node in graph.nodes() {
        let qof = node
            .qof_fraction
            .map(|q| format!("{q}"))
            .unwrap_or_default();
        w.write_record([
            node.id.to_string(),
            node.label.clone(),
            node.sector.to_string(),
            qof,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_edges<W: Write>(graph: &ProcessGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "target", "weight"])?;
    for edge in graph.edges() {
        w.write_record([
            edge.source.to_string(),
            edge.target.to_string(),
            format!("{}", edge.weight),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `nodes.csv` and `edges.csv` into a directory.
pub fn write_graph_dir(graph: &ProcessGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    write_nodes(graph, std::fs::File::create(dir.join("nodes.csv"))?)?;
    write_edges(graph, std::fs::File::create(dir.join("edges.csv"))?)?;
    Ok(())
}

/// Writes the stage table of an attack, baseline row first. Cascade
/// victims are `;`-joined ids.
pub fn write_trace<W: Write>(trace: &PercolationTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "stage",
        "attacked_id",
        "cascade_removed_ids",
        "lcc",
        "ncc",
        "fr",
        "sr",
    ])?;
    for rec in trace.records() {
        let attacked = rec.attacked.map(|id| id.to_string()).unwrap_or_default();
        let removed = rec
            .cascade_removed
            .iter()
            .map(|id| id.to_string())
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            rec.stage.to_string(),
            attacked,
            removed,
            rec.lcc.to_string(),
            rec.ncc.to_string(),
            format!("{}", rec.fr),
            format!("{}", rec.sr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `id,label,score` rows for one centrality basis, ordered by id.
pub fn write_scores<W: Write>(graph: &ProcessGraph, basis: Basis, out: W) -> Result<()> {
    let scores = crate::centrality::scores(graph, basis)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "label", "score"])?;
    for node in graph.nodes() {
        w.write_record([
            node.id.to_string(),
            node.label.clone(),
            format!("{}", scores[&node.id]),
        ])?;
    }
    w.flush()?;
    Ok(())
}
