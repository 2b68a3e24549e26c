//! Grid search over dependency weights on multi-parent nodes.
//!
//! Every node with two or more parents is a candidate: its incoming
//! weights are drawn from the tenths grid {0.0, 0.1, ..., 1.0} and must
//! sum to one, so each node contributes the integer compositions of 10
//! into in-degree parts. The objective is how many attack stages the
//! reweighted graph withstands before a chosen metric degrades to a
//! target level; more stages is better, and never degrading beats any
//! finite stage count.

use std::collections::BTreeMap;
use std::io::Write;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{NodeId, ProcessGraph};
use crate::metrics::Metric;
use crate::percolation::{run_attack, AttackPlan, Selection, Strength};

pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 10_000_000;

const EVAL_CHUNK: usize = 512;

/// Tenths of weight per candidate node, keyed by node, ordered by
/// ascending parent id within each vector. Each vector sums to 10.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightAssignment {
    tenths: BTreeMap<NodeId, Vec<u8>>,
}

impl WeightAssignment {
    pub fn new(tenths: BTreeMap<NodeId, Vec<u8>>) -> Result<Self> {
        for (node, parts) in &tenths {
            if parts.iter().map(|&t| u32::from(t)).sum::<u32>() != 10 {
                return Err(Error::InvalidPlan(format!(
                    "weights for node {node} do not sum to 1.0 on the tenths grid"
                )));
            }
        }
        Ok(WeightAssignment { tenths })
    }

    /// Reads the current weights of every candidate node off the graph.
    /// Fails if any weight is off the tenths grid.
    pub fn from_graph(graph: &ProcessGraph) -> Result<Self> {
        let mut tenths = BTreeMap::new();
        for (node, parents) in candidate_parents(graph)? {
            let mut parts = Vec::with_capacity(parents.len());
            for p in parents {
                let w = graph.edge_weight(p, node).unwrap_or(0.0);
                let scaled = w * 10.0;
                if (scaled - scaled.round()).abs() > 1e-9 {
                    return Err(Error::InvalidPlan(format!(
                        "edge {p} -> {node} weight {w} is off the tenths grid"
                    )));
                }
                parts.push(scaled.round() as u8);
            }
            tenths.insert(node, parts);
        }
        Self::new(tenths)
    }

    pub fn tenths(&self) -> &BTreeMap<NodeId, Vec<u8>> {
        &self.tenths
    }

    /// All grid values in (node, parent) order, for lexicographic
    /// comparison between assignments of the same shape.
    pub fn flattened(&self) -> Vec<u8> {
        self.tenths.values().flatten().copied().collect()
    }

    /// Materializes the tenths into edge weights for `ProcessGraph::reweighted`.
    pub fn edge_weights(&self, graph: &ProcessGraph) -> Result<BTreeMap<(NodeId, NodeId), f64>> {
        let candidates = candidate_parents(graph)?;
        let by_node: BTreeMap<NodeId, Vec<NodeId>> = candidates.into_iter().collect();
        if by_node.len() != self.tenths.len() {
            return Err(Error::InvalidPlan(format!(
                "assignment covers {} nodes, graph has {} candidates",
                self.tenths.len(),
                by_node.len()
            )));
        }
        let mut out = BTreeMap::new();
        for (node, parts) in &self.tenths {
            let parents = by_node.get(node).ok_or_else(|| {
                Error::InvalidPlan(format!("node {node} is not a candidate in this graph"))
            })?;
            if parents.len() != parts.len() {
                return Err(Error::InvalidPlan(format!(
                    "node {node} has {} parents, assignment lists {}",
                    parents.len(),
                    parts.len()
                )));
            }
            for (&parent, &t) in parents.iter().zip(parts) {
                out.insert((parent, *node), f64::from(t) / 10.0);
            }
        }
        Ok(out)
    }

    /// The graph with this assignment applied and re-frozen.
    pub fn apply(&self, graph: &ProcessGraph) -> Result<ProcessGraph> {
        graph.reweighted(&self.edge_weights(graph)?)
    }
}

/// Multi-parent nodes and their parents, both ascending.
pub fn candidate_parents(graph: &ProcessGraph) -> Result<Vec<(NodeId, Vec<NodeId>)>> {
    let mut out = Vec::new();
    for id in graph.node_ids() {
        let parents: Vec<NodeId> = graph.parents(id)?.collect();
        if parents.len() >= 2 {
            out.push((id, parents));
        }
    }
    Ok(out)
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .saturating_mul(u128::from(n - i))
            .checked_div(u128::from(i + 1))
            .unwrap_or(u128::MAX);
    }
    acc
}

/// Compositions of 10 into `parts` parts: C(10 + parts - 1, parts - 1).
fn compositions_per_node(parts: usize) -> u128 {
    binomial(10 + parts as u64 - 1, parts as u64 - 1)
}

/// Total number of grid assignments for this graph.
pub fn count_assignments(graph: &ProcessGraph) -> Result<u128> {
    let candidates = candidate_parents(graph)?;
    if candidates.is_empty() {
        return Err(Error::NoCandidateNodes);
    }
    Ok(candidates
        .iter()
        .map(|(_, ps)| compositions_per_node(ps.len()))
        .fold(1u128, |a, b| a.saturating_mul(b)))
}

fn all_compositions(parts: usize) -> Vec<Vec<u8>> {
    fn rec(remaining: u8, parts: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if parts == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=remaining {
            prefix.push(v);
            rec(remaining - v, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(10, parts, &mut Vec::new(), &mut out);
    out
}

/// Lazily yields every assignment in lexicographic order of the
/// flattened grid vector, candidates ascending by node id.
pub struct AssignmentStream {
    nodes: Vec<NodeId>,
    options: Vec<Vec<Vec<u8>>>,
    cursor: Vec<usize>,
    done: bool,
}

impl AssignmentStream {
    fn current(&self) -> WeightAssignment {
        let tenths = self
            .nodes
            .iter()
            .zip(self.options.iter().zip(&self.cursor))
            .map(|(&n, (opts, &i))| (n, opts[i].clone()))
            .collect();
        WeightAssignment { tenths }
    }
}

impl Iterator for AssignmentStream {
    type Item = WeightAssignment;

    fn next(&mut self) -> Option<WeightAssignment> {
        if self.done {
            return None;
        }
        let item = self.current();
        // Odometer over per-node composition indexes, last node fastest.
        let mut pos = self.cursor.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.cursor[pos] += 1;
            if self.cursor[pos] < self.options[pos].len() {
                break;
            }
            self.cursor[pos] = 0;
        }
        Some(item)
    }
}

pub fn enumerate_assignments(graph: &ProcessGraph) -> Result<AssignmentStream> {
    let candidates = candidate_parents(graph)?;
    if candidates.is_empty() {
        return Err(Error::NoCandidateNodes);
    }
    let (nodes, options): (Vec<NodeId>, Vec<Vec<Vec<u8>>>) = candidates
        .into_iter()
        .map(|(n, ps)| (n, all_compositions(ps.len())))
        .unzip();
    let cursor = vec![0; nodes.len()];
    Ok(AssignmentStream {
        nodes,
        options,
        cursor,
        done: false,
    })
}

/// Stage count reached by an attack before the objective level, ordered
/// so that "never degraded" beats every finite count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ObjectiveValue {
    /// Level reached at this stage.
    Reached(u32),
    /// Never reached; carries total survived stages + 1.
    Unreachable(u32),
}

impl ObjectiveValue {
    pub fn stage_count(&self) -> u32 {
        match *self {
            ObjectiveValue::Reached(s) => s,
            ObjectiveValue::Unreachable(s) => s,
        }
    }
}

impl std::fmt::Display for ObjectiveValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.stage_count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    RandomSampling,
}

impl std::str::FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "random_sampling" | "sampling" => Ok(SearchMode::RandomSampling),
            other => Err(Error::Format(format!("unknown search mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptimizationSpec {
    pub metric: Metric,
    /// Degradation level in percent.
    pub level: u8,
    pub plan: AttackPlan,
    pub mode: SearchMode,
    /// Random assignments drawn in sampling mode.
    pub samples: u64,
    pub seed: u64,
    /// Exhaustive mode refuses instances with more assignments than this.
    pub cap: u128,
}

impl Default for OptimizationSpec {
    fn default() -> Self {
        OptimizationSpec {
            metric: Metric::Sr,
            level: 80,
            plan: AttackPlan::new(Strength::Complete, Selection::Targeted),
            mode: SearchMode::Exhaustive,
            samples: 1_000,
            seed: 0,
            cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl OptimizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.level == 0 || self.level > 100 {
            return Err(Error::InvalidPlan(format!(
                "degradation level {} outside (0, 100]",
                self.level
            )));
        }
        if self.mode == SearchMode::RandomSampling && self.samples < 1 {
            return Err(Error::InvalidPlan("sampling needs at least one sample".into()));
        }
        self.plan.validate()
    }
}

/// Applies the assignment, runs the spec's attack, and counts stages to
/// the objective level. Pure in (graph, assignment, spec).
pub fn evaluate_assignment(
    graph: &ProcessGraph,
    assignment: &WeightAssignment,
    spec: &OptimizationSpec,
) -> Result<ObjectiveValue> {
    spec.validate()?;
    let reweighted = assignment.apply(graph)?;
    let trace = run_attack(&reweighted, &spec.plan)?;
    Ok(match trace.stages_to_degradation(spec.metric, f64::from(spec.level)) {
        Some(stage) => ObjectiveValue::Reached(stage),
        None => ObjectiveValue::Unreachable(trace.final_record().stage + 1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchEntry {
    pub index: u64,
    pub objective: ObjectiveValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationOutcome {
    pub best: WeightAssignment,
    pub objective: ObjectiveValue,
    /// One entry per evaluated assignment, ordered by index: enumeration
    /// index in exhaustive mode, draw index in sampling mode.
    pub log: Vec<SearchEntry>,
}

fn draw_composition(parts: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let total = compositions_per_node(parts);
    let mut index = rng.random_range(0..total as u64);
    // Stars-and-bars unranking in lexicographic order.
    let mut out = Vec::with_capacity(parts);
    let mut remaining = 10u64;
    for part in 0..parts {
        if part + 1 == parts {
            out.push(remaining as u8);
            break;
        }
        let slots = (parts - part - 1) as u64;
        let mut v = 0u64;
        loop {
            let below = binomial(remaining - v + slots - 1, slots - 1) as u64;
            if index < below {
                break;
            }
            index -= below;
            v += 1;
        }
        out.push(v as u8);
        remaining -= v;
    }
    out
}

fn best_of(
    graph: &ProcessGraph,
    spec: &OptimizationSpec,
    batch: Vec<(u64, WeightAssignment)>,
) -> Result<(Vec<SearchEntry>, Option<(ObjectiveValue, WeightAssignment)>)> {
    let evaluated: Vec<(u64, WeightAssignment, ObjectiveValue)> = batch
        .into_par_iter()
        .map(|(index, a)| {
            let objective = evaluate_assignment(graph, &a, spec)?;
            Ok((index, a, objective))
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(evaluated.len());
    let mut best: Option<(ObjectiveValue, WeightAssignment)> = None;
    for (index, assignment, objective) in evaluated {
        entries.push(SearchEntry { index, objective });
        let better = match &best {
            None => true,
            Some((obj, cur)) => {
                objective > *obj
                    || (objective == *obj && assignment.flattened() < cur.flattened())
            }
        };
        if better {
            best = Some((objective, assignment));
        }
    }
    Ok((entries, best))
}

/// Searches the grid for the most attack-resistant weights.
///
/// Exhaustive mode walks the whole enumeration (refusing instances past
/// the cap); sampling mode draws uniform assignments from the seed. Ties
/// go to the lexicographically smallest grid vector, which in exhaustive
/// mode is also the first one enumerated.
pub fn optimize(graph: &ProcessGraph, spec: &OptimizationSpec) -> Result<OptimizationOutcome> {
    spec.validate()?;
    let mut log = Vec::new();
    let mut best: Option<(ObjectiveValue, WeightAssignment)> = None;
    let mut merge = |entries: Vec<SearchEntry>,
                     candidate: Option<(ObjectiveValue, WeightAssignment)>| {
        log.extend(entries);
        if let Some((obj, a)) = candidate {
            let better = match &best {
                None => true,
                Some((cur_obj, cur)) => {
                    obj > *cur_obj || (obj == *cur_obj && a.flattened() < cur.flattened())
                }
            };
            if better {
                best = Some((obj, a));
            }
        }
    };

    match spec.mode {
        SearchMode::Exhaustive => {
            let count = count_assignments(graph)?;
            if count > spec.cap {
                return Err(Error::CapExceeded {
                    count,
                    cap: spec.cap,
                });
            }
            let mut stream = enumerate_assignments(graph)?;
            let mut index = 0u64;
            loop {
                let batch: Vec<(u64, WeightAssignment)> = stream
                    .by_ref()
                    .take(EVAL_CHUNK)
                    .map(|a| {
                        let item = (index, a);
                        index += 1;
                        item
                    })
                    .collect();
                if batch.is_empty() {
                    break;
                }
                let (entries, candidate) = best_of(graph, spec, batch)?;
                merge(entries, candidate);
            }
        }
        SearchMode::RandomSampling => {
            let shape: Vec<(NodeId, usize)> = candidate_parents(graph)?
                .into_iter()
                .map(|(n, ps)| (n, ps.len()))
                .collect();
            if shape.is_empty() {
                return Err(Error::NoCandidateNodes);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut index = 0u64;
            while index < spec.samples {
                let batch: Vec<(u64, WeightAssignment)> = (0..EVAL_CHUNK)
                    .map_while(|_| {
                        if index >= spec.samples {
                            return None;
                        }
                        let tenths = shape
                            .iter()
                            .map(|&(n, parts)| (n, draw_composition(parts, &mut rng)))
                            .collect();
                        let item = (index, WeightAssignment { tenths });
                        index += 1;
                        Some(item)
                    })
                    .collect();
                if batch.is_empty() {
                    break;
                }
                let (entries, candidate) = best_of(graph, spec, batch)?;
                merge(entries, candidate);
            }
        }
    }

    let (objective, best) = best.ok_or(Error::NoCandidateNodes)?;
    Ok(OptimizationOutcome {
        best,
        objective,
        log,
    })
}

/// `assignment_index,objective` rows in index order.
pub fn write_search_log<W: Write>(log: &[SearchEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["assignment_index", "objective"])?;
    for entry in log {
        w.write_record([entry.index.to_string(), entry.objective.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
