//! Robustness metrics over the surviving graph.
//!
//! Component-based metrics ignore edge direction and weight; an edge keeps a
//! pair connected even when degradation has driven its weight to zero. The
//! two ratio metrics compare against the frozen baseline, so a pristine
//! frozen graph scores 1.0 on both.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{NodeId, ProcessGraph};

/// Weakly connected components. Each component is sorted ascending; the
/// list is ordered by descending size, ties by smallest member id.
pub fn weak_components(graph: &ProcessGraph) -> Vec<Vec<NodeId>> {
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut components = Vec::new();
    for start in graph.node_ids() {
        if seen.contains(&start) {
            continue;
        }
        let mut member: BTreeSet<NodeId> = BTreeSet::new();
        let mut queue = VecDeque::new();
        member.insert(start);
        queue.push_back(start);
        while let Some(n) = queue.pop_front() {
            let neighbors: Vec<NodeId> = graph
                .children(n)
                .unwrap()
                .map(|(t, _)| t)
                .chain(graph.parents(n).unwrap())
                .collect();
            for t in neighbors {
                if member.insert(t) {
                    queue.push_back(t);
                }
            }
        }
        seen.extend(member.iter().copied());
        components.push(member.into_iter().collect::<Vec<_>>());
    }
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    components
}

/// Size of the largest weakly connected component, 0 for an empty graph.
pub fn largest_component(graph: &ProcessGraph) -> usize {
    weak_components(graph).first().map_or(0, |c| c.len())
}

/// Number of weakly connected components.
pub fn component_count(graph: &ProcessGraph) -> usize {
    weak_components(graph).len()
}

/// Histogram of component sizes: size -> how many components have it.
pub fn fragment_distribution(graph: &ProcessGraph) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for c in weak_components(graph) {
        *hist.entry(c.len()).or_insert(0usize) += 1;
    }
    hist
}

/// Fraction of node pairs that can still interact inside a common component:
/// sum of |C|(|C|-1) over surviving components, divided by N(N-1) for the
/// frozen node count N. Requires a frozen graph.
pub fn flow_robustness(graph: &ProcessGraph) -> Result<f64> {
    if !graph.is_frozen() {
        return Err(Error::NotFrozen);
    }
    let n = graph.n_original();
    match n {
        0 => Ok(0.0),
        1 => Ok(if graph.node_count() == 1 { 1.0 } else { 0.0 }),
        _ => {
            let mut pairs = 0u64;
            for c in weak_components(graph) {
                let s = c.len() as u64;
                pairs += s * (s - 1);
            }
            Ok(pairs as f64 / (n as u64 * (n as u64 - 1)) as f64)
        }
    }
}

/// Surviving service capacity: current out-weight mass over the frozen
/// total. A graph that never carried any weight scores 1.0 while any node
/// survives. Requires a frozen graph.
pub fn service_robustness(graph: &ProcessGraph) -> Result<f64> {
    if !graph.is_frozen() {
        return Err(Error::NotFrozen);
    }
    let total = graph.total_original_out_weight();
    if total == 0.0 {
        return Ok(if graph.node_count() > 0 { 1.0 } else { 0.0 });
    }
    let mut current = 0.0;
    for id in graph.node_ids() {
        current += graph.out_weight(id)?;
    }
    Ok(current / total)
}

/// The four stage metrics bundled together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSnapshot {
    pub lcc: usize,
    pub ncc: usize,
    pub fr: f64,
    pub sr: f64,
}

pub fn snapshot(graph: &ProcessGraph) -> Result<MetricsSnapshot> {
    let components = weak_components(graph);
    let lcc = components.first().map_or(0, |c| c.len());
    Ok(MetricsSnapshot {
        lcc,
        ncc: components.len(),
        fr: flow_robustness(graph)?,
        sr: service_robustness(graph)?,
    })
}

/// Which metric a campaign tracks or a degradation question is asked about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Lcc,
    Ncc,
    Fr,
    Sr,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Lcc, Metric::Ncc, Metric::Fr, Metric::Sr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Lcc => "lcc",
            Metric::Ncc => "ncc",
            Metric::Fr => "fr",
            Metric::Sr => "sr",
        }
    }

    pub fn of(&self, snap: &MetricsSnapshot) -> f64 {
        match self {
            Metric::Lcc => snap.lcc as f64,
            Metric::Ncc => snap.ncc as f64,
            Metric::Fr => snap.fr,
            Metric::Sr => snap.sr,
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lcc" => Ok(Metric::Lcc),
            "ncc" => Ok(Metric::Ncc),
            "fr" => Ok(Metric::Fr),
            "sr" => Ok(Metric::Sr),
            other => Err(Error::Format(format!("unknown metric `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ProcessNode, Sector};

    fn node(id: u32) -> ProcessNode {
        ProcessNode::new(id, format!("p{id}"), Sector::Power)
    }

    fn path(n: u32) -> ProcessGraph {
        let mut g = ProcessGraph::new();
        for id in 1..=n {
            g.add_node(node(id)).unwrap();
        }
        for id in 1..n {
            g.add_edge(NodeId(id), NodeId(id + 1), 1.0).unwrap();
        }
        g.freeze().unwrap();
        g
    }

    #[test]
    fn direction_is_ignored_for_components() {
        // a -> b <- c is one weak component.
        let mut g = ProcessGraph::new();
        for id in [1, 2, 3] {
            g.add_node(node(id)).unwrap();
        }
        g.add_edge(NodeId(1), NodeId(2), 0.5).unwrap();
        g.add_edge(NodeId(3), NodeId(2), 0.5).unwrap();
        g.freeze().unwrap();
        assert_eq!(component_count(&g), 1);
        assert_eq!(largest_component(&g), 3);
    }

    #[test]
    fn removing_the_middle_of_a_path_splits_it() {
        let mut g = path(7);
        assert_eq!(largest_component(&g), 7);
        assert_eq!(component_count(&g), 1);
        g.remove_node(NodeId(4)).unwrap();
        assert_eq!(largest_component(&g), 3);
        assert_eq!(component_count(&g), 2);
    }

    #[test]
    fn flow_robustness_matches_hand_count() {
        // Components of size 6, 3, 1 out of 10 frozen nodes:
        // (6*5 + 3*2 + 0) / (10*9) = 0.4
        let mut g = ProcessGraph::new();
        for id in 1..=10 {
            g.add_node(node(id)).unwrap();
        }
        for id in 1..6 {
            g.add_edge(NodeId(id), NodeId(id + 1), 1.0).unwrap();
        }
        g.add_edge(NodeId(7), NodeId(8), 1.0).unwrap();
        g.add_edge(NodeId(8), NodeId(9), 1.0).unwrap();
        g.freeze().unwrap();
        assert!((flow_robustness(&g).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn flow_robustness_keeps_the_frozen_denominator() {
        let mut g = path(4);
        assert_eq!(flow_robustness(&g).unwrap(), 1.0);
        g.remove_node(NodeId(1)).unwrap();
        // One component of 3 survives out of N=4: 3*2 / (4*3) = 0.5
        assert!((flow_robustness(&g).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn service_robustness_tracks_weight_mass() {
        let mut g = ProcessGraph::new();
        for id in [1, 2, 3] {
            g.add_node(node(id)).unwrap();
        }
        g.add_edge(NodeId(1), NodeId(2), 1.0).unwrap();
        g.add_edge(NodeId(1), NodeId(3), 0.0).unwrap();
        g.add_edge(NodeId(2), NodeId(3), 1.0).unwrap();
        g.freeze().unwrap();
        assert_eq!(service_robustness(&g).unwrap(), 1.0);
        g.scale_out_edges(NodeId(2), 0.5).unwrap();
        assert!((service_robustness(&g).unwrap() - 0.75).abs() < 1e-12);
        g.remove_node(NodeId(1)).unwrap();
        assert!((service_robustness(&g).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn degenerate_graphs_have_defined_scores() {
        let mut empty = ProcessGraph::new();
        empty.freeze().unwrap();
        assert_eq!(flow_robustness(&empty).unwrap(), 0.0);
        assert_eq!(service_robustness(&empty).unwrap(), 0.0);

        let mut single = ProcessGraph::new();
        single.add_node(node(1)).unwrap();
        single.freeze().unwrap();
        assert_eq!(flow_robustness(&single).unwrap(), 1.0);
        assert_eq!(service_robustness(&single).unwrap(), 1.0);
        single.remove_node(NodeId(1)).unwrap();
        assert_eq!(flow_robustness(&single).unwrap(), 0.0);
        assert_eq!(service_robustness(&single).unwrap(), 0.0);
    }

    #[test]
    fn metrics_require_a_frozen_graph() {
        let g = ProcessGraph::new();
        assert!(matches!(flow_robustness(&g), Err(Error::NotFrozen)));
        assert!(matches!(service_robustness(&g), Err(Error::NotFrozen)));
    }

    #[test]
    fn fragment_histogram_counts_sizes() {
        let mut g = path(7);
        g.remove_node(NodeId(4)).unwrap();
        let hist = fragment_distribution(&g);
        assert_eq!(hist.get(&3), Some(&2));
        assert_eq!(hist.len(), 1);
    }

    #[test]
    fn component_ordering_is_deterministic() {
        let mut g = ProcessGraph::new();
        for id in 1..=5 {
            g.add_node(node(id)).unwrap();
        }
        g.add_edge(NodeId(4), NodeId(5), 1.0).unwrap();
        g.add_edge(NodeId(2), NodeId(3), 1.0).unwrap();
        g.freeze().unwrap();
        let comps = weak_components(&g);
        assert_eq!(
            comps,
            vec![
                vec![NodeId(2), NodeId(3)],
                vec![NodeId(4), NodeId(5)],
                vec![NodeId(1)],
            ]
        );
    }
}
