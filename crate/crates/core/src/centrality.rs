//! Node importance scores used to pick targeted-attack victims.
//!
//! The two bases the attack engine trusts by default are weighted
//! out-degree (how much service a node currently provides) and betweenness
//! (how many shortest dependency chains pass through it). The rest are
//! available for exploratory ranking.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{NodeId, ProcessGraph};

const POWER_ITER_TOL: f64 = 1e-9;
const POWER_ITER_MAX: usize = 1000;
const PAGERANK_DAMPING: f64 = 0.85;

/// Scoring basis for rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    WeightedOutDegree,
    Betweenness,
    Degree,
    InDegree,
    OutDegree,
    Eigenvector,
    Pagerank,
}

impl Basis {
    pub const ALL: [Basis; 7] = [
        Basis::WeightedOutDegree,
        Basis::Betweenness,
        Basis::Degree,
        Basis::InDegree,
        Basis::OutDegree,
        Basis::Eigenvector,
        Basis::Pagerank,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Basis::WeightedOutDegree => "weighted-out-degree",
            Basis::Betweenness => "betweenness",
            Basis::Degree => "degree",
            Basis::InDegree => "in-degree",
            Basis::OutDegree => "out-degree",
            Basis::Eigenvector => "eigenvector",
            Basis::Pagerank => "pagerank",
        }
    }

    /// Bases considered safe for targeted attacks without opting in.
    pub fn is_core(&self) -> bool {
        matches!(self, Basis::WeightedOutDegree | Basis::Betweenness)
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "weighted-out-degree" | "wod" | "od" => Ok(Basis::WeightedOutDegree),
            "betweenness" | "bw" => Ok(Basis::Betweenness),
            "degree" => Ok(Basis::Degree),
            "in-degree" => Ok(Basis::InDegree),
            "out-degree" => Ok(Basis::OutDegree),
            "eigenvector" => Ok(Basis::Eigenvector),
            "pagerank" => Ok(Basis::Pagerank),
            other => Err(Error::Format(format!("unknown centrality basis `{other}`"))),
        }
    }
}

/// Scores every surviving node under the given basis.
pub fn scores(graph: &ProcessGraph, basis: Basis) -> Result<BTreeMap<NodeId, f64>> {
    match basis {
        Basis::WeightedOutDegree => graph
            .node_ids()
            .map(|id| graph.out_weight(id).map(|w| (id, w)))
            .collect(),
        Basis::Betweenness => Ok(betweenness(graph)),
        Basis::Degree => graph
            .node_ids()
            .map(|id| {
                Ok((id, (graph.in_degree(id)? + graph.out_degree(id)?) as f64))
            })
            .collect(),
        Basis::InDegree => graph
            .node_ids()
            .map(|id| Ok((id, graph.in_degree(id)? as f64)))
            .collect(),
        Basis::OutDegree => graph
            .node_ids()
            .map(|id| Ok((id, graph.out_degree(id)? as f64)))
            .collect(),
        Basis::Eigenvector => eigenvector(graph),
        Basis::Pagerank => pagerank(graph),
    }
}

/// Nodes ordered by descending score; equal scores order by ascending id.
pub fn ranking(graph: &ProcessGraph, basis: Basis) -> Result<Vec<(NodeId, f64)>> {
    let mut ranked: Vec<(NodeId, f64)> = scores(graph, basis)?.into_iter().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Directed betweenness with unit hop lengths, unnormalized. Shortest-path
/// ties split their credit fractionally.
pub fn betweenness(graph: &ProcessGraph) -> BTreeMap<NodeId, f64> {
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let n = ids.len();
    let adj: Vec<Vec<usize>> = ids
        .iter()
        .map(|&id| graph.children(id).unwrap().map(|(t, _)| index[&t]).collect())
        .collect();

    let mut bc = vec![0.0f64; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut delta = vec![0.0f64; n];

    for s in 0..n {
        sigma.fill(0.0);
        dist.fill(-1);
        for p in preds.iter_mut() {
            p.clear();
        }
        order.clear();
        delta.fill(0.0);

        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    ids.into_iter().zip(bc).collect()
}

/// Eigenvector centrality on incoming current weights via power iteration.
/// Fails on graphs whose iteration collapses to zero (weight-free feedback),
/// which is the usual situation on strict dependency DAGs.
pub fn eigenvector(graph: &ProcessGraph) -> Result<BTreeMap<NodeId, f64>> {
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let n = ids.len();
    if n == 0 {
        return Ok(BTreeMap::new());
    }
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let out: Vec<Vec<(usize, f64)>> = ids
        .iter()
        .map(|&id| {
            graph
                .children(id)
                .unwrap()
                .map(|(t, w)| (index[&t], w))
                .collect()
        })
        .collect();

    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..POWER_ITER_MAX {
        let mut next = vec![0.0f64; n];
        for (j, edges) in out.iter().enumerate() {
            for &(i, w) in edges {
                next[i] += w * x[j];
            }
        }
        let norm: f64 = next.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            return Err(Error::Format(
                "eigenvector centrality undefined here: power iteration collapsed to zero".into(),
            ));
        }
        for v in next.iter_mut() {
            *v /= norm;
        }
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < POWER_ITER_TOL {
            return Ok(ids.into_iter().zip(x).collect());
        }
    }
    Err(Error::NonConvergence {
        what: "eigenvector centrality".into(),
        iterations: POWER_ITER_MAX,
    })
}

/// Weighted pagerank with damping 0.85. Nodes whose out-weight has dropped
/// to zero spread their rank uniformly.
pub fn pagerank(graph: &ProcessGraph) -> Result<BTreeMap<NodeId, f64>> {
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let n = ids.len();
    if n == 0 {
        return Ok(BTreeMap::new());
    }
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut out: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut out_total = vec![0.0f64; n];
    for (j, &id) in ids.iter().enumerate() {
        let edges: Vec<(usize, f64)> = graph
            .children(id)
            .unwrap()
            .map(|(t, w)| (index[&t], w))
            .collect();
        out_total[j] = edges.iter().map(|(_, w)| w).sum();
        out.push(edges);
    }

    let inv_n = 1.0 / n as f64;
    let mut x = vec![inv_n; n];
    for _ in 0..POWER_ITER_MAX {
        let mut dangling = 0.0;
        for (j, &total) in out_total.iter().enumerate() {
            if total == 0.0 {
                dangling += x[j];
            }
        }
        let base = (1.0 - PAGERANK_DAMPING) * inv_n + PAGERANK_DAMPING * dangling * inv_n;
        let mut next = vec![base; n];
        for (j, edges) in out.iter().enumerate() {
            if out_total[j] == 0.0 {
                continue;
            }
            let share = PAGERANK_DAMPING * x[j] / out_total[j];
            for &(i, w) in edges {
                next[i] += share * w;
            }
        }
        let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if change < POWER_ITER_TOL {
            return Ok(ids.into_iter().zip(x).collect());
        }
    }
    Err(Error::NonConvergence {
        what: "pagerank".into(),
        iterations: POWER_ITER_MAX,
    })
}
