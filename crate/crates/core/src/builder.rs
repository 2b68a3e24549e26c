//! Builds frozen process graphs from declarative scenario files.
//!
//! A scenario lists processes and their weighted dependencies, plus the
//! physical utility topologies the delivery processes run over. Deliveries
//! that ride the same wires inherit extra dependencies: when one delivery's
//! path is a contiguous sub-walk of another's, the shorter one supports the
//! longer one. Those derived edges are folded into the declared weights by
//! proportional re-normalization.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use crate::error::{Error, Result, ValidationReport, WeightSumIssue};
use crate::graph::{NodeId, ProcessGraph, ProcessNode, Sector};

/// Boolean resource-to-process mapping. Row = process, column = resource;
/// a true entry means the resource executes the process.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeMatrix {
    processes: Vec<NodeId>,
    resources: Vec<String>,
    entries: Vec<Vec<bool>>,
}

impl KnowledgeMatrix {
    /// `entries[p][r]` pairs `processes[p]` with `resources[r]`. Every
    /// process must be executed by at least one resource.
    pub fn new(
        processes: Vec<NodeId>,
        resources: Vec<String>,
        entries: Vec<Vec<bool>>,
    ) -> Result<Self> {
        if entries.len() != processes.len() {
            return Err(Error::DimensionMismatch {
                expected: processes.len(),
                got: entries.len(),
            });
        }
        for (row, id) in entries.iter().zip(&processes) {
            if row.len() != resources.len() {
                return Err(Error::DimensionMismatch {
                    expected: resources.len(),
                    got: row.len(),
                });
            }
            if !row.iter().any(|&b| b) {
                return Err(Error::Scenario(format!(
                    "process {id} is not executed by any resource"
                )));
            }
        }
        Ok(KnowledgeMatrix {
            processes,
            resources,
            entries,
        })
    }

    pub fn processes(&self) -> &[NodeId] {
        &self.processes
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    /// Boolean matrix-vector product: a process is active iff some active
    /// resource executes it.
    pub fn map_resources_to_processes(&self, active_resources: &[bool]) -> Result<Vec<bool>> {
        if active_resources.len() != self.resources.len() {
            return Err(Error::DimensionMismatch {
                expected: self.resources.len(),
                got: active_resources.len(),
            });
        }
        Ok(self
            .entries
            .iter()
            .map(|row| row.iter().zip(active_resources).any(|(&j, &r)| j && r))
            .collect())
    }
}

/// Undirected physical network of one sector, with named facilities pinned
/// to its nodes.
#[derive(Debug, Clone)]
pub struct UtilityTopology {
    pub sector: Sector,
    adjacency: BTreeMap<u32, BTreeSet<u32>>,
    facilities: BTreeMap<String, u32>,
}

impl UtilityTopology {
    pub fn new(sector: Sector, nodes: &[u32], edges: &[(u32, u32)]) -> Result<Self> {
        let mut adjacency: BTreeMap<u32, BTreeSet<u32>> =
            nodes.iter().map(|&n| (n, BTreeSet::new())).collect();
        if adjacency.len() != nodes.len() {
            return Err(Error::Scenario(format!(
                "{sector} topology lists a node twice"
            )));
        }
        for &(a, b) in edges {
            if a == b {
                return Err(Error::Scenario(format!(
                    "{sector} topology has a self-loop at node {a}"
                )));
            }
            for end in [a, b] {
                if !adjacency.contains_key(&end) {
                    return Err(Error::Scenario(format!(
                        "{sector} topology edge ({a}, {b}) references unknown node {end}"
                    )));
                }
            }
            adjacency.get_mut(&a).unwrap().insert(b);
            adjacency.get_mut(&b).unwrap().insert(a);
        }
        Ok(UtilityTopology {
            sector,
            adjacency,
            facilities: BTreeMap::new(),
        })
    }

    pub fn place_facility(&mut self, label: &str, node: u32) -> Result<()> {
        if !self.adjacency.contains_key(&node) {
            return Err(Error::Scenario(format!(
                "facility {label:?} pinned to unknown {} node {node}",
                self.sector
            )));
        }
        if self.facilities.insert(label.to_string(), node).is_some() {
            return Err(Error::Scenario(format!(
                "facility label {label:?} duplicated in the {} sector",
                self.sector
            )));
        }
        Ok(())
    }

    pub fn facility_node(&self, label: &str) -> Option<u32> {
        self.facilities.get(label).copied()
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.adjacency.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of connected components; disconnection is reported, not fatal.
    pub fn component_count(&self) -> usize {
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        let mut comps = 0;
        for &start in self.adjacency.keys() {
            if seen.contains(&start) {
                continue;
            }
            comps += 1;
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adjacency[&v] {
                    if seen.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
        }
        comps
    }
}

/// A delivery process with its physical route resolved to an edge walk.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryProcess {
    pub process: NodeId,
    pub sector: Sector,
    /// Visited physical nodes, in walk order.
    pub nodes: Vec<u32>,
    /// Walk edges as unordered endpoint pairs, in walk order.
    pub edges: Vec<(u32, u32)>,
}

impl DeliveryProcess {
    /// Builds from an explicit node walk, validating it against the
    /// topology: simple (no repeated node), every hop a physical link.
    pub fn from_walk(process: NodeId, topology: &UtilityTopology, walk: &[u32]) -> Result<Self> {
        if walk.len() < 2 {
            return Err(Error::Scenario(format!(
                "delivery process {process}: path needs at least two physical nodes"
            )));
        }
        let distinct: BTreeSet<u32> = walk.iter().copied().collect();
        if distinct.len() != walk.len() {
            return Err(Error::Scenario(format!(
                "delivery process {process}: path revisits a physical node"
            )));
        }
        let mut edges = Vec::with_capacity(walk.len() - 1);
        for pair in walk.windows(2) {
            if !topology.has_edge(pair[0], pair[1]) {
                return Err(Error::Scenario(format!(
                    "delivery process {process}: no {} link between nodes {} and {}",
                    topology.sector, pair[0], pair[1]
                )));
            }
            edges.push(ordered_pair(pair[0], pair[1]));
        }
        Ok(DeliveryProcess {
            process,
            sector: topology.sector,
            nodes: walk.to_vec(),
            edges,
        })
    }
}

fn ordered_pair(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The unique hop-shortest path between two facilities, as an edge walk.
/// Ties are an error: an arbitrary tie-break would silently change which
/// dependencies get derived.
pub fn resolve_shortest_path(
    topology: &UtilityTopology,
    from: &str,
    to: &str,
) -> Result<Vec<u32>> {
    let unreachable = || Error::UnreachablePath {
        sector: topology.sector.to_string(),
        from: from.to_string(),
        to: to.to_string(),
    };
    let src = topology.facility_node(from).ok_or_else(|| {
        Error::Scenario(format!(
            "facility {from:?} is not placed in the {} sector",
            topology.sector
        ))
    })?;
    let dst = topology.facility_node(to).ok_or_else(|| {
        Error::Scenario(format!(
            "facility {to:?} is not placed in the {} sector",
            topology.sector
        ))
    })?;
    if src == dst {
        return Err(Error::Scenario(format!(
            "facilities {from:?} and {to:?} share {} node {src}; nothing to deliver over",
            topology.sector
        )));
    }

    let mut dist: BTreeMap<u32, u32> = BTreeMap::new();
    let mut count: BTreeMap<u32, u64> = BTreeMap::new();
    let mut pred: BTreeMap<u32, u32> = BTreeMap::new();
    dist.insert(src, 0);
    count.insert(src, 1);
    let mut queue = VecDeque::from([src]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for &w in &topology.adjacency[&v] {
            if !dist.contains_key(&w) {
                dist.insert(w, d + 1);
                count.insert(w, 0);
                pred.insert(w, v);
                queue.push_back(w);
            }
            if dist[&w] == d + 1 {
                *count.get_mut(&w).unwrap() += count[&v];
            }
        }
    }
    match count.get(&dst) {
        None => Err(unreachable()),
        Some(0) => Err(unreachable()),
        Some(1) => {
            let mut walk = vec![dst];
            let mut cur = dst;
            while cur != src {
                cur = pred[&cur];
                walk.push(cur);
            }
            walk.reverse();
            Ok(walk)
        }
        Some(_) => Err(Error::AmbiguousPath {
            sector: topology.sector.to_string(),
            from: from.to_string(),
            to: to.to_string(),
        }),
    }
}

/// True when `inner` appears as a contiguous slice of `outer`, walked in
/// the same direction. Node sequences, not edge sequences: a one-hop walk
/// still carries a direction.
fn is_subwalk(inner: &[u32], outer: &[u32]) -> bool {
    inner.len() >= 2 && outer.windows(inner.len()).any(|w| w == inner)
}

fn shares_an_edge(a: &[(u32, u32)], b: &[(u32, u32)]) -> bool {
    let set: BTreeSet<(u32, u32)> = a.iter().copied().collect();
    b.iter().any(|e| set.contains(e))
}

/// Dependencies induced by nested delivery routes: `(support, dependent)`
/// pairs where the support's walk is a contiguous sub-walk of the
/// dependent's, sorted and deduplicated. Input order never matters.
pub fn derive_path_dependencies(
    topology: &UtilityTopology,
    deliveries: &[DeliveryProcess],
) -> Vec<(NodeId, NodeId)> {
    derive_with_overlaps(topology, deliveries).0
}

fn derive_with_overlaps(
    topology: &UtilityTopology,
    deliveries: &[DeliveryProcess],
) -> (Vec<(NodeId, NodeId)>, Vec<(NodeId, NodeId)>) {
    let mut derived = BTreeSet::new();
    let mut overlaps = BTreeSet::new();
    for b in deliveries {
        if b.sector != topology.sector {
            continue;
        }
        for a in deliveries {
            if a.sector != topology.sector || a.process == b.process {
                continue;
            }
            if is_subwalk(&b.nodes, &a.nodes) {
                derived.insert((b.process, a.process));
            } else if !is_subwalk(&a.nodes, &b.nodes) && shares_an_edge(&a.edges, &b.edges) {
                let (x, y) = if a.process < b.process {
                    (a.process, b.process)
                } else {
                    (b.process, a.process)
                };
                overlaps.insert((x, y));
            }
        }
    }
    (
        derived.into_iter().collect(),
        overlaps.into_iter().collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    #[default]
    Production,
    Delivery,
    Service,
}

fn default_qof() -> f64 {
    0.5
}

fn default_step() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDefaults {
    #[serde(default = "default_qof")]
    pub qof_fraction: f64,
    #[serde(default = "default_step")]
    pub partial_step: f64,
}

impl Default for ScenarioDefaults {
    fn default() -> Self {
        ScenarioDefaults {
            qof_fraction: default_qof(),
            partial_step: default_step(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: Vec<u32>,
    #[serde(default)]
    pub edges: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilitySpec {
    pub label: String,
    pub sector: Sector,
    pub node: u32,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub id: u32,
    pub label: String,
    pub sector: Sector,
    #[serde(default)]
    pub kind: ProcessKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qof_fraction: Option<f64>,
    /// Delivery endpoints by facility label; the route is resolved as the
    /// unique shortest path unless `path` pins it explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependencySpec {
    pub source: u32,
    pub target: u32,
    pub weight: f64,
}

/// On-disk scenario document. See the repository docs for the format.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub defaults: ScenarioDefaults,
    #[serde(default)]
    pub topologies: BTreeMap<Sector, TopologySpec>,
    #[serde(default)]
    pub facilities: Vec<FacilitySpec>,
    pub processes: Vec<ProcessSpec>,
    #[serde(default)]
    pub dependencies: Vec<DependencySpec>,
}

impl ScenarioConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }
}

/// What happened while assembling a graph: derived edges, re-weighted
/// nodes, reported oddities. Inspect `messages` for the human-readable log.
#[derive(Debug, Clone, Default)]
pub struct BuildReport {
    pub messages: Vec<String>,
    pub derived_edges: Vec<(NodeId, NodeId)>,
    pub renormalized: Vec<NodeId>,
    pub partial_overlaps: Vec<(NodeId, NodeId)>,
    pub sector_components: BTreeMap<Sector, usize>,
}

/// Assembles and freezes the scenario's process graph.
///
/// Nodes come straight from the process list. Edges are the declared
/// dependencies plus the derived nested-route dependencies; targets that
/// gained derived parents get every incoming weight re-normalized so the
/// sum returns to one, with each derived parent weighted like an average
/// declared parent.
pub fn build_graph(config: &ScenarioConfig) -> Result<(ProcessGraph, BuildReport)> {
    build_graph_with(config, false)
}

/// `build_graph` with a switch: under `auto_normalize`, a declared
/// in-weight sum off one is scaled back to one instead of rejected.
pub fn build_graph_with(
    config: &ScenarioConfig,
    auto_normalize: bool,
) -> Result<(ProcessGraph, BuildReport)> {
    let mut report = BuildReport::default();

    let mut ids = BTreeSet::new();
    for p in &config.processes {
        if !ids.insert(p.id) {
            return Err(Error::Scenario(format!("process id {} declared twice", p.id)));
        }
    }
    let known = |id: u32| ids.contains(&id);

    let mut topologies: BTreeMap<Sector, UtilityTopology> = BTreeMap::new();
    for (&sector, spec) in &config.topologies {
        topologies.insert(sector, UtilityTopology::new(sector, &spec.nodes, &spec.edges)?);
    }
    for f in &config.facilities {
        let topo = topologies.get_mut(&f.sector).ok_or_else(|| {
            Error::Scenario(format!(
                "facility {:?} placed in the {} sector, which has no topology",
                f.label, f.sector
            ))
        })?;
        topo.place_facility(&f.label, f.node)?;
    }
    for (sector, topo) in &topologies {
        let comps = topo.component_count();
        report.sector_components.insert(*sector, comps);
        if comps > 1 {
            report.messages.push(format!(
                "{sector} topology is disconnected ({comps} components)"
            ));
        }
    }

    // Resolve delivery routes.
    let mut deliveries: BTreeMap<Sector, Vec<DeliveryProcess>> = BTreeMap::new();
    for p in &config.processes {
        let is_delivery = p.kind == ProcessKind::Delivery;
        if !is_delivery {
            if p.from.is_some() || p.to.is_some() || p.path.is_some() {
                return Err(Error::Scenario(format!(
                    "process {} ({:?}) is not a delivery; from/to/path do not apply",
                    p.id, p.label
                )));
            }
            continue;
        }
        let topo = topologies.get(&p.sector).ok_or_else(|| {
            Error::Scenario(format!(
                "delivery process {} needs a {} topology",
                p.id, p.sector
            ))
        })?;
        let walk = match (&p.path, &p.from, &p.to) {
            (Some(path), _, _) => {
                if let (Some(from), Some(to)) = (&p.from, &p.to) {
                    let (src, dst) = (topo.facility_node(from), topo.facility_node(to));
                    if src != path.first().copied() || dst != path.last().copied() {
                        return Err(Error::Scenario(format!(
                            "delivery process {}: explicit path does not run {from:?} -> {to:?}",
                            p.id
                        )));
                    }
                }
                path.clone()
            }
            (None, Some(from), Some(to)) => resolve_shortest_path(topo, from, to)?,
            _ => {
                return Err(Error::Scenario(format!(
                    "delivery process {} needs either a path or both endpoints",
                    p.id
                )))
            }
        };
        deliveries
            .entry(p.sector)
            .or_default()
            .push(DeliveryProcess::from_walk(NodeId(p.id), topo, &walk)?);
    }

    // Declared dependencies, validated.
    let mut declared: BTreeMap<NodeId, BTreeMap<NodeId, f64>> = BTreeMap::new();
    let mut seen_pairs = BTreeSet::new();
    for d in &config.dependencies {
        if !known(d.source) || !known(d.target) {
            return Err(Error::Scenario(format!(
                "dependency {} -> {} references an undeclared process",
                d.source, d.target
            )));
        }
        if d.source == d.target {
            return Err(Error::Scenario(format!(
                "dependency {} -> {} is a self-loop",
                d.source, d.target
            )));
        }
        if !seen_pairs.insert((d.source, d.target)) {
            return Err(Error::Scenario(format!(
                "dependency {} -> {} declared twice",
                d.source, d.target
            )));
        }
        if !d.weight.is_finite() || !(0.0..=1.0).contains(&d.weight) {
            return Err(Error::WeightOutOfRange {
                a: NodeId(d.source),
                b: NodeId(d.target),
                weight: d.weight,
            });
        }
        declared
            .entry(NodeId(d.target))
            .or_default()
            .insert(NodeId(d.source), d.weight);
    }

    let labels: BTreeMap<NodeId, &str> = config
        .processes
        .iter()
        .map(|p| (NodeId(p.id), p.label.as_str()))
        .collect();
    let mut sum_report = ValidationReport::default();
    for (&target, parents) in declared.iter_mut() {
        let sum: f64 = parents.values().sum();
        if (sum - 1.0).abs() <= crate::graph::WEIGHT_SUM_TOL {
            continue;
        }
        if auto_normalize && sum > 0.0 {
            for w in parents.values_mut() {
                *w /= sum;
            }
            report.renormalized.push(target);
            report.messages.push(format!(
                "auto-normalized declared weights of process {target} (pre-sum {sum})"
            ));
        } else {
            sum_report.weight_sums.push(WeightSumIssue {
                node: target,
                label: labels[&target].to_string(),
                sum,
            });
        }
    }
    if !sum_report.is_empty() {
        return Err(Error::Validation(sum_report));
    }

    // Derived nested-route dependencies.
    let mut derived_pairs: Vec<(NodeId, NodeId)> = Vec::new();
    for (sector, topo) in &topologies {
        if let Some(list) = deliveries.get(sector) {
            let (pairs, overlaps) = derive_with_overlaps(topo, list);
            for pair in &overlaps {
                report.messages.push(format!(
                    "{sector} deliveries {} and {} overlap without nesting; no edge derived",
                    pair.0, pair.1
                ));
            }
            report.partial_overlaps.extend(overlaps);
            derived_pairs.extend(pairs);
        }
    }
    derived_pairs.sort();

    // Fold derived parents into the weight table.
    let mut weights = declared;
    for &(support, dependent) in &derived_pairs {
        let parents = weights.entry(dependent).or_default();
        if parents.contains_key(&support) {
            report.messages.push(format!(
                "derived dependency {support} -> {dependent} already declared; kept as is"
            ));
            continue;
        }
        report.derived_edges.push((support, dependent));
        let declared_count = parents.len();
        let mean = if declared_count > 0 {
            parents.values().sum::<f64>() / declared_count as f64
        } else {
            1.0
        };
        parents.insert(support, mean);
    }
    for (&target, parents) in weights.iter_mut() {
        let sum: f64 = parents.values().sum();
        if (sum - 1.0).abs() > crate::graph::WEIGHT_SUM_TOL && sum > 0.0 {
            for w in parents.values_mut() {
                *w /= sum;
            }
            report.renormalized.push(target);
            report.messages.push(format!(
                "re-normalized incoming weights of process {target} (pre-sum {sum})"
            ));
        }
    }

    // Reject cycles that carry no weight at all; they would let a set of
    // processes "support" each other while nothing real feeds them.
    let zero_edges: Vec<(NodeId, NodeId)> = weights
        .iter()
        .flat_map(|(&t, ps)| {
            ps.iter()
                .filter(|(_, &w)| w == 0.0)
                .map(move |(&s, _)| (s, t))
        })
        .collect();
    if let Some(cycle_node) = find_cycle(&zero_edges) {
        return Err(Error::Scenario(format!(
            "zero-weight dependency cycle through process {cycle_node}"
        )));
    }

    let mut graph = ProcessGraph::new();
    for p in &config.processes {
        let mut node = ProcessNode::new(p.id, p.label.clone(), p.sector);
        if let Some(q) = p.qof_fraction {
            node = node.with_qof(q);
        }
        graph.add_node(node)?;
    }
    for (&target, parents) in &weights {
        for (&source, &w) in parents {
            graph.add_edge(source, target, w)?;
        }
    }
    graph.freeze()?;
    report.messages.push(format!(
        "built {:?}: {} processes, {} dependencies ({} derived)",
        config.name,
        graph.node_count(),
        graph.edge_count(),
        report.derived_edges.len()
    ));
    Ok((graph, report))
}

/// Any node on a directed cycle within `edges`, if one exists.
fn find_cycle(edges: &[(NodeId, NodeId)]) -> Option<NodeId> {
    let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut indeg: BTreeMap<NodeId, usize> = BTreeMap::new();
    for &(s, t) in edges {
        out.entry(s).or_default().push(t);
        indeg.entry(s).or_insert(0);
        *indeg.entry(t).or_insert(0) += 1;
    }
    let mut queue: VecDeque<NodeId> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut seen = 0usize;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &t in out.get(&v).into_iter().flatten() {
            let d = indeg.get_mut(&t).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push_back(t);
            }
        }
    }
    if seen == indeg.len() {
        None
    } else {
        indeg
            .iter()
            .find(|(_, &d)| d > 0)
            .map(|(&n, _)| n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knowledge_matrix_identity_and_or_rows() {
        let ids = vec![NodeId(1), NodeId(2), NodeId(3)];
        let res = vec!["r1".into(), "r2".into(), "r3".into()];
        let identity = vec![
            vec![true, false, false],
            vec![false, true, false],
            vec![false, false, true],
        ];
        let m = KnowledgeMatrix::new(ids.clone(), res, identity).unwrap();
        assert_eq!(
            m.map_resources_to_processes(&[true, false, true]).unwrap(),
            vec![true, false, true]
        );
        assert_eq!(
            m.map_resources_to_processes(&[false, false, false]).unwrap(),
            vec![false, false, false]
        );

        let m2 = KnowledgeMatrix::new(
            vec![NodeId(1)],
            vec!["a".into(), "b".into()],
            vec![vec![true, true]],
        )
        .unwrap();
        assert_eq!(m2.map_resources_to_processes(&[false, true]).unwrap(), vec![true]);
        assert!(matches!(
            m2.map_resources_to_processes(&[true]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn knowledge_matrix_rejects_unexecuted_processes() {
        let err = KnowledgeMatrix::new(
            vec![NodeId(1), NodeId(2)],
            vec!["a".into()],
            vec![vec![true], vec![false]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Scenario(_)));
    }

    fn line_topology() -> UtilityTopology {
        let mut t = UtilityTopology::new(Sector::Power, &[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        t.place_facility("A", 1).unwrap();
        t.place_facility("B", 3).unwrap();
        t
    }

    #[test]
    fn shortest_path_on_a_line_is_unique() {
        let t = line_topology();
        assert_eq!(resolve_shortest_path(&t, "A", "B").unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn equal_length_paths_are_ambiguous() {
        let mut t =
            UtilityTopology::new(Sector::Water, &[1, 2, 3, 4], &[(1, 2), (2, 3), (3, 4), (4, 1)])
                .unwrap();
        t.place_facility("A", 1).unwrap();
        t.place_facility("B", 3).unwrap();
        assert!(matches!(
            resolve_shortest_path(&t, "A", "B"),
            Err(Error::AmbiguousPath { .. })
        ));
    }

    #[test]
    fn disconnected_facilities_are_unreachable() {
        let mut t = UtilityTopology::new(Sector::Gas, &[1, 2, 3], &[(1, 2)]).unwrap();
        t.place_facility("A", 1).unwrap();
        t.place_facility("B", 3).unwrap();
        assert_eq!(t.component_count(), 2);
        assert!(matches!(
            resolve_shortest_path(&t, "A", "B"),
            Err(Error::UnreachablePath { .. })
        ));
    }

    fn walk(t: &UtilityTopology, id: u32, nodes: &[u32]) -> DeliveryProcess {
        DeliveryProcess::from_walk(NodeId(id), t, nodes).unwrap()
    }

    #[test]
    fn nested_walk_derives_a_dependency() {
        let t = UtilityTopology::new(
            Sector::Power,
            &[1, 2, 3, 4],
            &[(1, 2), (2, 3), (3, 4)],
        )
        .unwrap();
        let a = walk(&t, 10, &[1, 2, 3, 4]);
        let b = walk(&t, 11, &[1, 2, 3]);
        let deps = derive_path_dependencies(&t, &[a, b]);
        assert_eq!(deps, vec![(NodeId(11), NodeId(10))]);
    }

    #[test]
    fn disjoint_walks_derive_nothing() {
        let t = UtilityTopology::new(Sector::Power, &[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let a = walk(&t, 10, &[1, 2]);
        let b = walk(&t, 11, &[2, 3]);
        assert!(derive_path_dependencies(&t, &[a, b]).is_empty());
    }

    #[test]
    fn three_nested_walks_derive_transitively() {
        let t = UtilityTopology::new(
            Sector::Power,
            &[1, 2, 3, 4],
            &[(1, 2), (2, 3), (3, 4)],
        )
        .unwrap();
        let p1 = walk(&t, 1, &[1, 2]);
        let p2 = walk(&t, 2, &[1, 2, 3]);
        let p3 = walk(&t, 3, &[1, 2, 3, 4]);
        let mut deps = derive_path_dependencies(&t, &[p3.clone(), p1.clone(), p2.clone()]);
        assert_eq!(
            deps,
            vec![
                (NodeId(1), NodeId(2)),
                (NodeId(1), NodeId(3)),
                (NodeId(2), NodeId(3)),
            ]
        );
        // Invariant under permutation of the input list.
        let perm = derive_path_dependencies(&t, &[p1, p3, p2]);
        deps.sort();
        assert_eq!(deps, perm);
    }

    #[test]
    fn reversed_segments_do_not_nest() {
        let t = UtilityTopology::new(
            Sector::Power,
            &[1, 2, 3, 4],
            &[(1, 2), (2, 3), (3, 4)],
        )
        .unwrap();
        let a = walk(&t, 10, &[1, 2, 3, 4]);
        let rev = walk(&t, 11, &[3, 2, 1]);
        assert!(derive_path_dependencies(&t, &[a, rev]).is_empty());
    }

    fn scenario_json(dependencies: &str) -> String {
        format!(
            r#"{{
  "name": "toy",
  "topologies": {{
    "power": {{ "nodes": [1, 2, 3, 4], "edges": [[1, 2], [2, 3], [3, 4]] }}
  }},
  "facilities": [
    {{ "label": "GPP", "sector": "power", "node": 1 }},
    {{ "label": "WTP", "sector": "power", "node": 3 }},
    {{ "label": "WIRF", "sector": "power", "node": 4 }}
  ],
  "processes": [
    {{ "id": 1, "label": "Generate power", "sector": "power" }},
    {{ "id": 2, "label": "Power to WTP", "sector": "power", "kind": "delivery", "from": "GPP", "to": "WTP" }},
    {{ "id": 3, "label": "Power to WIRF", "sector": "power", "kind": "delivery", "from": "GPP", "to": "WIRF" }},
    {{ "id": 4, "label": "Treat water", "sector": "water" }}
  ],
  "dependencies": [{dependencies}]
}}"#
        )
    }

    #[test]
    fn build_folds_derived_edges_into_the_weights() {
        let json = scenario_json(
            r#"{ "source": 1, "target": 2, "weight": 1.0 },
               { "source": 1, "target": 3, "weight": 1.0 },
               { "source": 2, "target": 4, "weight": 1.0 }"#,
        );
        let config = ScenarioConfig::from_str(&json).unwrap();
        let (g, report) = build_graph(&config).unwrap();
        assert_eq!(g.node_count(), 4);
        // Route of process 2 nests inside route of process 3.
        assert_eq!(report.derived_edges, vec![(NodeId(2), NodeId(3))]);
        assert_eq!(g.edge_count(), 4);
        assert!((g.edge_weight(NodeId(1), NodeId(3)).unwrap() - 0.5).abs() < 1e-12);
        assert!((g.edge_weight(NodeId(2), NodeId(3)).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(g.edge_weight(NodeId(1), NodeId(2)).unwrap(), 1.0);
        assert!(g.is_frozen());
        assert_eq!(report.renormalized, vec![NodeId(3)]);
    }

    #[test]
    fn build_without_derivable_routes_matches_declarations() {
        let json = scenario_json(
            r#"{ "source": 1, "target": 2, "weight": 1.0 },
               { "source": 2, "target": 4, "weight": 1.0 }"#,
        )
        .replace(r#""from": "GPP", "to": "WIRF""#, r#""from": "WTP", "to": "WIRF""#);
        let config = ScenarioConfig::from_str(&json).unwrap();
        let (g, report) = build_graph(&config).unwrap();
        assert!(report.derived_edges.is_empty());
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn build_rejects_dangling_and_duplicate_references() {
        let json = scenario_json(r#"{ "source": 1, "target": 99, "weight": 1.0 }"#);
        let config = ScenarioConfig::from_str(&json).unwrap();
        assert!(matches!(build_graph(&config), Err(Error::Scenario(_))));

        let json = scenario_json(
            r#"{ "source": 1, "target": 2, "weight": 0.5 },
               { "source": 1, "target": 2, "weight": 0.5 }"#,
        );
        let config = ScenarioConfig::from_str(&json).unwrap();
        assert!(matches!(build_graph(&config), Err(Error::Scenario(_))));
    }

    #[test]
    fn build_reports_every_bad_weight_sum() {
        let json = scenario_json(
            r#"{ "source": 1, "target": 2, "weight": 0.8 },
               { "source": 1, "target": 4, "weight": 0.3 },
               { "source": 2, "target": 4, "weight": 0.3 }"#,
        );
        let config = ScenarioConfig::from_str(&json).unwrap();
        match build_graph(&config).unwrap_err() {
            Error::Validation(report) => {
                let nodes: Vec<NodeId> = report.weight_sums.iter().map(|i| i.node).collect();
                assert_eq!(nodes, vec![NodeId(2), NodeId(4)]);
            }
            other => panic!("expected weight-sum report, got {other}"),
        }
    }

    #[test]
    fn auto_normalize_rescales_and_warns_instead_of_rejecting() {
        let json = scenario_json(
            r#"{ "source": 1, "target": 2, "weight": 0.6 },
               { "source": 3, "target": 2, "weight": 0.3 }"#,
        );
        let config = ScenarioConfig::from_str(&json).unwrap();
        assert!(matches!(build_graph(&config), Err(Error::Validation(_))));

        let (g, report) = build_graph_with(&config, true).unwrap();
        assert!(report.renormalized.contains(&NodeId(2)));
        assert!(report.messages.iter().any(|m| m.contains("auto-normalized")));
        let total: f64 = g.in_weight(NodeId(2)).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
        let w = g
            .edges()
            .find(|e| e.source == NodeId(1) && e.target == NodeId(2))
            .unwrap()
            .weight;
        assert!((w - 0.6 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn build_rejects_zero_weight_cycles() {
        let json = r#"{
  "processes": [
    { "id": 1, "label": "a", "sector": "power" },
    { "id": 2, "label": "b", "sector": "power" },
    { "id": 3, "label": "c", "sector": "power" }
  ],
  "dependencies": [
    { "source": 1, "target": 2, "weight": 1.0 },
    { "source": 2, "target": 3, "weight": 0.0 },
    { "source": 3, "target": 2, "weight": 0.0 },
    { "source": 1, "target": 3, "weight": 1.0 }
  ]
}"#;
        let config = ScenarioConfig::from_str(json).unwrap();
        match build_graph(&config).unwrap_err() {
            Error::Scenario(msg) => assert!(msg.contains("zero-weight"), "{msg}"),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn build_is_deterministic() {
        let json = scenario_json(
            r#"{ "source": 1, "target": 2, "weight": 1.0 },
               { "source": 1, "target": 3, "weight": 1.0 }"#,
        );
        let config = ScenarioConfig::from_str(&json).unwrap();
        let (g1, _) = build_graph(&config).unwrap();
        let (g2, _) = build_graph(&config).unwrap();
        let e1: Vec<_> = g1.edges().map(|e| (e.source, e.target, e.weight.to_bits())).collect();
        let e2: Vec<_> = g2.edges().map(|e| (e.source, e.target, e.weight.to_bits())).collect();
        assert_eq!(e1, e2);
    }

    #[test]
    fn explicit_paths_override_resolution_but_must_check_out() {
        let mut json = scenario_json(r#"{ "source": 1, "target": 2, "weight": 1.0 }"#);
        json = json.replace(
            r#""kind": "delivery", "from": "GPP", "to": "WTP""#,
            r#""kind": "delivery", "path": [1, 2, 3]"#,
        );
        let config = ScenarioConfig::from_str(&json).unwrap();
        assert!(build_graph(&config).is_ok());

        let bad = json.replace("[1, 2, 3]", "[1, 3]");
        let config = ScenarioConfig::from_str(&bad).unwrap();
        assert!(matches!(build_graph(&config), Err(Error::Scenario(_))));
    }

    #[test]
    fn non_delivery_processes_cannot_carry_route_fields() {
        let json = scenario_json(r#"{ "source": 1, "target": 2, "weight": 1.0 }"#)
            .replace(r#""label": "Treat water", "sector": "water""#,
                     r#""label": "Treat water", "sector": "water", "path": [1, 2]"#);
        let config = ScenarioConfig::from_str(&json).unwrap();
        assert!(matches!(build_graph(&config), Err(Error::Scenario(_))));
    }
}
