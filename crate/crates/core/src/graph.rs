//! Directed weighted process-dependency graph.
//!
//! Nodes are system processes, an edge `a -> b` means `a` supports `b` with
//! the given fraction of `b`'s required input. Graphs are built mutable,
//! then frozen. Freezing validates that every node with incoming edges has
//! weights summing to one and snapshots the original weight structure that
//! degradation is measured against. After freezing, only percolation-style
//! edits are allowed: removing nodes and rescaling a node's out-edges.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result, ValidationReport, WeightSumIssue};

/// Tolerance for the incoming-weight sum check at freeze time.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Process identifier. Stable across freezing and attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for NodeId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.trim().parse::<u32>().map(NodeId)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Utility sector a process belongs to. Delivery processes are routed over
/// the topology of their sector; `Service` covers cross-cutting processes
/// such as repair capability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sector {
    Power,
    Water,
    Gas,
    Heat,
    Transport,
    Service,
    Other,
}

impl Sector {
    pub const ALL: [Sector; 7] = [
        Sector::Power,
        Sector::Water,
        Sector::Gas,
        Sector::Heat,
        Sector::Transport,
        Sector::Service,
        Sector::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Sector::Power => "power",
            Sector::Water => "water",
            Sector::Gas => "gas",
            Sector::Heat => "heat",
            Sector::Transport => "transport",
            Sector::Service => "service",
            Sector::Other => "other",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "power" | "electric" | "electricity" => Ok(Sector::Power),
            "water" => Ok(Sector::Water),
            "gas" | "natural_gas" => Ok(Sector::Gas),
            "heat" | "heating" => Ok(Sector::Heat),
            "transport" | "transportation" => Ok(Sector::Transport),
            "service" => Ok(Sector::Service),
            "other" => Ok(Sector::Other),
            unknown => Err(Error::Format(format!("unknown sector `{unknown}`"))),
        }
    }
}

impl serde::Serialize for Sector {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for Sector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One process in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessNode {
    pub id: NodeId,
    pub label: String,
    pub sector: Sector,
    /// Per-node override for the quality-of-function threshold used by
    /// cascade checks. `None` means the attack plan default applies.
    pub qof_fraction: Option<f64>,
    original_in_weight: f64,
    original_out_weight: f64,
}

impl ProcessNode {
    pub fn new(id: impl Into<NodeId>, label: impl Into<String>, sector: Sector) -> Self {
        ProcessNode {
            id: id.into(),
            label: label.into(),
            sector,
            qof_fraction: None,
            original_in_weight: 0.0,
            original_out_weight: 0.0,
        }
    }

    pub fn with_qof(mut self, qof_fraction: f64) -> Self {
        self.qof_fraction = Some(qof_fraction);
        self
    }

    /// Sum of incoming weights at freeze time (0 for root nodes).
    pub fn original_in_weight(&self) -> f64 {
        self.original_in_weight
    }

    /// Sum of outgoing weights at freeze time (0 for sinks).
    pub fn original_out_weight(&self) -> f64 {
        self.original_out_weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EdgeState {
    original: f64,
    current: f64,
}

#[derive(Debug, Clone)]
struct NodeEntry {
    node: ProcessNode,
    out: BTreeMap<NodeId, EdgeState>,
    parents: BTreeSet<NodeId>,
}

/// Borrowed view of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeView {
    pub source: NodeId,
    pub target: NodeId,
    /// Weight after any degradation applied so far.
    pub weight: f64,
    /// Weight the graph was frozen with.
    pub original_weight: f64,
}

/// The process-dependency graph. See the module docs for the life cycle.
#[derive(Debug, Clone, Default)]
pub struct ProcessGraph {
    nodes: BTreeMap<NodeId, NodeEntry>,
    edge_count: usize,
    frozen: bool,
    n_original: usize,
    total_original_out_weight: f64,
}

impl ProcessGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Node count at freeze time. Removals do not change it.
    pub fn n_original(&self) -> usize {
        self.n_original
    }

    /// Sum of all edge weights at freeze time.
    pub fn total_original_out_weight(&self) -> f64 {
        self.total_original_out_weight
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Result<&ProcessNode> {
        self.nodes
            .get(&id)
            .map(|e| &e.node)
            .ok_or(Error::UnknownNode(id))
    }

    /// All surviving nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &ProcessNode> {
        self.nodes.values().map(|e| &e.node)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    /// All surviving edges, ordered by (source, target).
    pub fn edges(&self) -> impl Iterator<Item = EdgeView> + '_ {
        self.nodes.iter().flat_map(|(&source, entry)| {
            entry.out.iter().map(move |(&target, state)| EdgeView {
                source,
                target,
                weight: state.current,
                original_weight: state.original,
            })
        })
    }

    /// Out-neighbors of `id` with current weights, ascending by target.
    pub fn children(&self, id: NodeId) -> Result<impl Iterator<Item = (NodeId, f64)> + '_> {
        let entry = self.nodes.get(&id).ok_or(Error::UnknownNode(id))?;
        Ok(entry.out.iter().map(|(&t, s)| (t, s.current)))
    }

    /// In-neighbors of `id`, ascending.
    pub fn parents(&self, id: NodeId) -> Result<impl Iterator<Item = NodeId> + '_> {
        let entry = self.nodes.get(&id).ok_or(Error::UnknownNode(id))?;
        Ok(entry.parents.iter().copied())
    }

    pub fn edge_weight(&self, source: NodeId, target: NodeId) -> Option<f64> {
        self.nodes
            .get(&source)
            .and_then(|e| e.out.get(&target))
            .map(|s| s.current)
    }

    pub fn edge_original_weight(&self, source: NodeId, target: NodeId) -> Option<f64> {
        self.nodes
            .get(&source)
            .and_then(|e| e.out.get(&target))
            .map(|s| s.original)
    }

    pub fn in_degree(&self, id: NodeId) -> Result<usize> {
        let entry = self.nodes.get(&id).ok_or(Error::UnknownNode(id))?;
        Ok(entry.parents.len())
    }

    pub fn out_degree(&self, id: NodeId) -> Result<usize> {
        let entry = self.nodes.get(&id).ok_or(Error::UnknownNode(id))?;
        Ok(entry.out.len())
    }

    /// Sum of current incoming weights, accumulated in ascending parent order
    /// so repeated runs sum floats identically.
    pub fn in_weight(&self, id: NodeId) -> Result<f64> {
        let entry = self.nodes.get(&id).ok_or(Error::UnknownNode(id))?;
        let mut sum = 0.0;
        for &p in &entry.parents {
            sum += self.nodes[&p].out[&id].current;
        }
        Ok(sum)
    }

    /// Sum of current outgoing weights.
    pub fn out_weight(&self, id: NodeId) -> Result<f64> {
        let entry = self.nodes.get(&id).ok_or(Error::UnknownNode(id))?;
        // Empty sums give -0.0 these days; keep the sign out of the CSVs.
        Ok(entry.out.values().map(|s| s.current).sum::<f64>() + 0.0)
    }

    /// QoF threshold for a node: its own override, else the supplied default.
    pub fn effective_qof(&self, id: NodeId, default: f64) -> Result<f64> {
        Ok(self.node(id)?.qof_fraction.unwrap_or(default))
    }

    pub fn add_node(&mut self, node: ProcessNode) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        if let Some(q) = node.qof_fraction {
            if !(0.0..=1.0).contains(&q) || q.is_nan() {
                return Err(Error::Format(format!(
                    "node {}: qof_fraction {q} outside [0, 1]",
                    node.id
                )));
            }
        }
        if self.nodes.contains_key(&node.id) {
            return Err(Error::DuplicateNode(node.id));
        }
        self.nodes.insert(
            node.id,
            NodeEntry {
                node,
                out: BTreeMap::new(),
                parents: BTreeSet::new(),
            },
        );
        Ok(())
    }

    /// Adds `source -> target` with the given original weight. Both endpoints
    /// must already exist. Self-loops and parallel edges are rejected.
    pub fn add_edge(&mut self, source: NodeId, target: NodeId, weight: f64) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        if source == target {
            return Err(Error::SelfLoop(source));
        }
        if !weight.is_finite() || !(0.0..=1.0).contains(&weight) {
            return Err(Error::WeightOutOfRange {
                a: source,
                b: target,
                weight,
            });
        }
        if !self.nodes.contains_key(&target) {
            return Err(Error::UnknownNode(target));
        }
        let entry = self.nodes.get_mut(&source).ok_or(Error::UnknownNode(source))?;
        if entry.out.contains_key(&target) {
            return Err(Error::DuplicateEdge {
                a: source,
                b: target,
            });
        }
        entry.out.insert(
            target,
            EdgeState {
                original: weight,
                current: weight,
            },
        );
        self.nodes.get_mut(&target).unwrap().parents.insert(source);
        self.edge_count += 1;
        Ok(())
    }

    /// Rescales every node's incoming weights to sum to one. Only meaningful
    /// before freezing. Returns `(node, previous_sum)` for each node that was
    /// adjusted; nodes whose incoming sum is zero are left for `freeze` to
    /// report.
    pub fn normalize_incoming(&mut self) -> Result<Vec<(NodeId, f64)>> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        let mut adjusted = Vec::new();
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        for id in ids {
            let sum = {
                let entry = &self.nodes[&id];
                let mut s = 0.0;
                for &p in &entry.parents {
                    s += self.nodes[&p].out[&id].original;
                }
                s
            };
            if self.nodes[&id].parents.is_empty() || (sum - 1.0).abs() <= WEIGHT_SUM_TOL {
                continue;
            }
            if sum <= 0.0 {
                continue;
            }
            let parents: Vec<NodeId> = self.nodes[&id].parents.iter().copied().collect();
            for p in parents {
                let state = self.nodes.get_mut(&p).unwrap().out.get_mut(&id).unwrap();
                state.original /= sum;
                state.current = state.original;
            }
            adjusted.push((id, sum));
        }
        Ok(adjusted)
    }

    /// Validates the graph and locks its structure. Every node with at least
    /// one incoming edge must have incoming weights summing to one within
    /// [`WEIGHT_SUM_TOL`]. On failure the error lists every offending node.
    pub fn freeze(&mut self) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        let mut report = ValidationReport::default();
        let mut in_sums: BTreeMap<NodeId, f64> = BTreeMap::new();
        for (&id, entry) in &self.nodes {
            let mut sum = 0.0;
            for &p in &entry.parents {
                sum += self.nodes[&p].out[&id].original;
            }
            if !entry.parents.is_empty() && (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                report.weight_sums.push(WeightSumIssue {
                    node: id,
                    label: entry.node.label.clone(),
                    sum,
                });
            }
            in_sums.insert(id, sum);
        }
        if !report.is_empty() {
            return Err(Error::Validation(report));
        }
        let mut total = 0.0;
        for entry in self.nodes.values_mut() {
            let out: f64 = entry.out.values().map(|s| s.original).sum();
            entry.node.original_in_weight = in_sums[&entry.node.id];
            entry.node.original_out_weight = out;
            total += out;
        }
        self.n_original = self.nodes.len();
        self.total_original_out_weight = total;
        self.frozen = true;
        Ok(())
    }

    /// Removes a node and every incident edge. Frozen graphs only; building
    /// code never deletes, attacks do.
    pub fn remove_node(&mut self, id: NodeId) -> Result<()> {
        if !self.frozen {
            return Err(Error::NotFrozen);
        }
        let entry = self.nodes.remove(&id).ok_or(Error::UnknownNode(id))?;
        self.edge_count -= entry.out.len() + entry.parents.len();
        for p in &entry.parents {
            self.nodes.get_mut(p).unwrap().out.remove(&id);
        }
        for t in entry.out.keys() {
            self.nodes.get_mut(t).unwrap().parents.remove(&id);
        }
        Ok(())
    }

    /// Sets every out-edge of `id` to `original * factor`. Set semantics:
    /// applying the same factor twice is a no-op, factors do not stack.
    pub fn scale_out_edges(&mut self, id: NodeId, factor: f64) -> Result<()> {
        if !self.frozen {
            return Err(Error::NotFrozen);
        }
        if !factor.is_finite() || !(0.0..=1.0).contains(&factor) {
            return Err(Error::Format(format!(
                "scale factor {factor} outside [0, 1] for node {id}"
            )));
        }
        let entry = self.nodes.get_mut(&id).ok_or(Error::UnknownNode(id))?;
        for state in entry.out.values_mut() {
            state.current = state.original * factor;
        }
        Ok(())
    }

    /// Nodes reachable from `id` along out-edges, excluding `id` itself,
    /// ordered by hop distance and then by id within each ring.
    pub fn descendants(&self, id: NodeId) -> Result<Vec<NodeId>> {
        if !self.nodes.contains_key(&id) {
            return Err(Error::UnknownNode(id));
        }
        let mut dist: BTreeMap<NodeId, u32> = BTreeMap::new();
        let mut queue = VecDeque::new();
        dist.insert(id, 0);
        queue.push_back(id);
        while let Some(n) = queue.pop_front() {
            let d = dist[&n];
            for (&t, _) in &self.nodes[&n].out {
                if let std::collections::btree_map::Entry::Vacant(v) = dist.entry(t) {
                    v.insert(d + 1);
                    queue.push_back(t);
                }
            }
        }
        let mut rings: BTreeMap<u32, BTreeSet<NodeId>> = BTreeMap::new();
        for (n, d) in dist {
            if n != id {
                rings.entry(d).or_default().insert(n);
            }
        }
        Ok(rings.into_values().flatten().collect())
    }

    /// Copy of this graph with some original weights replaced, re-validated
    /// and re-frozen. Used when searching over alternative weightings.
    pub fn reweighted(&self, overrides: &BTreeMap<(NodeId, NodeId), f64>) -> Result<ProcessGraph> {
        for &(s, t) in overrides.keys() {
            if self.edge_original_weight(s, t).is_none() {
                return Err(Error::Format(format!("no edge {s} -> {t} to reweight")));
            }
        }
        let mut g = ProcessGraph::new();
        for entry in self.nodes.values() {
            let mut node = entry.node.clone();
            node.original_in_weight = 0.0;
            node.original_out_weight = 0.0;
            g.add_node(node)?;
        }
        for ev in self.edges() {
            let w = overrides
                .get(&(ev.source, ev.target))
                .copied()
                .unwrap_or(ev.original_weight);
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                return Err(Error::WeightOutOfRange {
                    a: ev.source,
                    b: ev.target,
                    weight: w,
                });
            }
            let e = g.nodes.get_mut(&ev.source).unwrap();
            e.out.insert(
                ev.target,
                EdgeState {
                    original: w,
                    current: w,
                },
            );
            g.nodes.get_mut(&ev.target).unwrap().parents.insert(ev.source);
            g.edge_count += 1;
        }
        g.freeze()?;
        Ok(g)
    }
}
