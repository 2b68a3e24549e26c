//! Staged node-attack simulation with cascading degradation.
//!
//! A stage attacks one node. Complete attacks delete it; partial attacks
//! step its output down by a fixed fraction per hit and delete it once the
//! remaining service drops below the acceptable level. Either way the
//! damage then propagates: every descendant's out-edges are rescaled by its
//! surviving input fraction, and descendants that lose all input or fall
//! below their quality-of-function threshold are deleted too. A descendant
//! removed mid-stage lowers the input of nodes processed before it, so the
//! stage sweeps the descendant set in breadth-first order repeatedly until
//! nothing changes. Stages repeat until the survivor count reaches
//! `stop_at_nodes`.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::centrality::{self, Basis};
use crate::error::{Error, Result};
use crate::graph::{NodeId, ProcessGraph};
use crate::metrics::{self, MetricsSnapshot};

/// Factors closer than this are treated as unchanged when deciding whether
/// a cascade sweep made progress.
const FACTOR_EPS: f64 = 1e-12;

/// Hard ceiling on sweeps within one stage. Cyclic dependencies approach
/// their stable weights geometrically, so convergence to `FACTOR_EPS` can
/// take more sweeps than the node count.
const SWEEP_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Complete,
    Partial,
}

impl std::str::FromStr for Strength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "complete" => Ok(Strength::Complete),
            "partial" => Ok(Strength::Partial),
            other => Err(Error::Format(format!("unknown attack strength `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Random,
    Targeted,
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Selection::Random),
            "targeted" => Ok(Selection::Targeted),
            other => Err(Error::Format(format!("unknown victim selection `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    /// Rank once on the pristine graph, then walk the list.
    Static,
    /// Re-rank the surviving graph before every stage.
    Adaptive,
}

impl std::str::FromStr for RankingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(RankingMode::Static),
            "adaptive" => Ok(RankingMode::Adaptive),
            other => Err(Error::Format(format!("unknown ranking mode `{other}`"))),
        }
    }
}

/// How much a direct hit degrades the victim's output.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum StepMode {
    /// Deterministic `partial_step` per hit.
    Fixed,
    /// Each hit draws its step uniformly from `[min, max]`.
    Uniform { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttackPlan {
    pub strength: Strength,
    pub selection: Selection,
    /// Scoring basis for targeted selection. Ignored for random.
    pub basis: Basis,
    pub ranking_mode: RankingMode,
    /// Per-hit degradation fraction for partial attacks.
    pub partial_step: f64,
    pub step_mode: StepMode,
    /// Default quality-of-function threshold for cascade removal; nodes may
    /// carry their own override.
    pub qof_fraction: f64,
    /// Threshold for removing the directly attacked node in partial mode.
    /// `None` means "same as qof_fraction".
    pub acceptable_service_fraction: Option<f64>,
    pub seed: u64,
    /// The attack loop stops once this few nodes survive.
    pub stop_at_nodes: usize,
    /// Targeted attacks normally stick to weighted out-degree or
    /// betweenness; set this to rank by the exploratory bases too.
    pub allow_extended_basis: bool,
}

impl AttackPlan {
    pub fn new(strength: Strength, selection: Selection) -> Self {
        AttackPlan {
            strength,
            selection,
            basis: Basis::WeightedOutDegree,
            ranking_mode: RankingMode::Static,
            partial_step: 0.20,
            step_mode: StepMode::Fixed,
            qof_fraction: 0.5,
            acceptable_service_fraction: None,
            seed: 0,
            stop_at_nodes: 2,
            allow_extended_basis: false,
        }
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn acceptable_service(&self) -> f64 {
        self.acceptable_service_fraction.unwrap_or(self.qof_fraction)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.partial_step > 0.0 && self.partial_step <= 1.0) {
            return Err(Error::InvalidPlan(format!(
                "partial_step {} outside (0, 1]",
                self.partial_step
            )));
        }
        if !(0.0..=1.0).contains(&self.qof_fraction) || self.qof_fraction.is_nan() {
            return Err(Error::InvalidPlan(format!(
                "qof_fraction {} outside [0, 1]",
                self.qof_fraction
            )));
        }
        let asf = self.acceptable_service();
        if !(0.0..=1.0).contains(&asf) || asf.is_nan() {
            return Err(Error::InvalidPlan(format!(
                "acceptable_service_fraction {asf} outside [0, 1]"
            )));
        }
        if let StepMode::Uniform { min, max } = self.step_mode {
            if !(min > 0.0 && min <= max && max <= 1.0) {
                return Err(Error::InvalidPlan(format!(
                    "uniform step interval [{min}, {max}] invalid; need 0 < min <= max <= 1"
                )));
            }
        }
        if self.selection == Selection::Targeted
            && !self.basis.is_core()
            && !self.allow_extended_basis
        {
            return Err(Error::InvalidPlan(format!(
                "basis {} is exploratory; set allow_extended_basis to attack with it",
                self.basis
            )));
        }
        Ok(())
    }
}

/// One attack stage. `attacked` is `None` only for the stage-0 baseline.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StageRecord {
    pub stage: u32,
    pub attacked: Option<NodeId>,
    pub cascade_removed: Vec<NodeId>,
    pub lcc: usize,
    pub ncc: usize,
    pub fr: f64,
    pub sr: f64,
}

impl StageRecord {
    fn at(stage: u32, attacked: Option<NodeId>, removed: Vec<NodeId>, m: MetricsSnapshot) -> Self {
        StageRecord {
            stage,
            attacked,
            cascade_removed: removed,
            lcc: m.lcc,
            ncc: m.ncc,
            fr: m.fr,
            sr: m.sr,
        }
    }

    pub fn metrics(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            lcc: self.lcc,
            ncc: self.ncc,
            fr: self.fr,
            sr: self.sr,
        }
    }
}

/// Full history of one attack run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PercolationTrace {
    pub plan: AttackPlan,
    pub stage0: StageRecord,
    pub stages: Vec<StageRecord>,
}

impl PercolationTrace {
    /// Baseline record followed by the attack stages.
    pub fn records(&self) -> impl Iterator<Item = &StageRecord> {
        std::iter::once(&self.stage0).chain(self.stages.iter())
    }

    pub fn final_record(&self) -> &StageRecord {
        self.stages.last().unwrap_or(&self.stage0)
    }

    /// First stage at which `metric` has lost at least `level` percent of
    /// its baseline value, or `None` if the run never got there.
    pub fn stages_to_degradation(&self, metric: metrics::Metric, level: f64) -> Option<u32> {
        let baseline = metric.of(&self.stage0.metrics());
        let threshold = (1.0 - level / 100.0) * baseline;
        self.stages
            .iter()
            .find(|r| metric.of(&r.metrics()) <= threshold)
            .map(|r| r.stage)
    }
}

/// Per-node accumulated direct-hit damage.
#[derive(Debug, Clone, Copy)]
enum HitState {
    Count(u32),
    Accum(f64),
}

fn hit_clamp(plan: &AttackPlan, hits: &BTreeMap<NodeId, HitState>, id: NodeId) -> f64 {
    match hits.get(&id) {
        None => 1.0,
        Some(HitState::Count(k)) => (1.0 - *k as f64 * plan.partial_step).max(0.0),
        Some(HitState::Accum(a)) => (1.0 - a).max(0.0),
    }
}

/// Out-edge factor currently applied to `id`, read back off the first
/// surviving out-edge that carried original weight. `None` when the node
/// has nothing left to scale.
fn applied_factor(graph: &ProcessGraph, id: NodeId) -> Option<f64> {
    let edges: Vec<(NodeId, f64)> = graph.children(id).ok()?.collect();
    for (target, current) in edges {
        let original = graph.edge_original_weight(id, target)?;
        if original > 0.0 {
            return Some(current / original);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CascadeKind {
    RemoveAttacked,
    DegradeAttacked,
}

fn cascade_inner(
    graph: &mut ProcessGraph,
    attacked: NodeId,
    kind: CascadeKind,
    plan: &AttackPlan,
    hits: &BTreeMap<NodeId, HitState>,
) -> Result<Vec<NodeId>> {
    if !graph.is_frozen() {
        return Err(Error::NotFrozen);
    }
    // The descendant set is fixed before any mutation. In degrade mode the
    // attacked node joins the sweep so cycles back into it re-resolve.
    let descendants = graph.descendants(attacked)?;
    let mut domain: Vec<NodeId> = Vec::with_capacity(descendants.len() + 1);
    let attacked_survives = match kind {
        CascadeKind::RemoveAttacked => {
            graph.remove_node(attacked)?;
            false
        }
        CascadeKind::DegradeAttacked => {
            domain.push(attacked);
            true
        }
    };
    domain.extend(descendants);

    let mut removed = Vec::new();
    let mut sweeps = 0usize;
    loop {
        sweeps += 1;
        if sweeps > SWEEP_CAP {
            return Err(Error::NonConvergence {
                what: "cascade".into(),
                iterations: SWEEP_CAP,
            });
        }
        let mut changed = false;
        for &d in &domain {
            if !graph.contains(d) {
                continue;
            }
            let node = graph.node(d)?;
            let original_in = node.original_in_weight();
            let original_out = node.original_out_weight();
            let in_w = graph.in_weight(d)?;
            let ratio = if original_in > 0.0 {
                (in_w / original_in).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let clamp = hit_clamp(plan, hits, d);
            let factor = (ratio * clamp).clamp(0.0, 1.0);
            if let Some(current) = applied_factor(graph, d) {
                if (current - factor).abs() > FACTOR_EPS {
                    graph.scale_out_edges(d, factor)?;
                    changed = true;
                }
            }
            let out_w = graph.out_weight(d)?;
            let is_attacked = attacked_survives && d == attacked;
            let threshold = if is_attacked {
                plan.acceptable_service()
            } else {
                graph.effective_qof(d, plan.qof_fraction)?
            };
            let starved = original_in > 0.0 && in_w == 0.0;
            let below = original_out > 0.0 && out_w < threshold * original_out;
            // A fully spent hit budget removes the victim even when the
            // service thresholds cannot fire (sinks, zero thresholds);
            // without this, step = 1.0 would not reduce to a complete attack.
            let spent = is_attacked && clamp <= 0.0;
            if starved || below || spent {
                graph.remove_node(d)?;
                if !is_attacked {
                    removed.push(d);
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(removed)
}

/// Applies one attack event to `graph` in place: optionally removes the
/// attacked node, then propagates degradation through its descendants until
/// the stage is stable. Returns the descendant ids removed, in removal
/// order; the attacked node itself is never listed.
pub fn cascade(
    graph: &mut ProcessGraph,
    attacked: NodeId,
    remove_attacked: bool,
    qof_fraction: f64,
) -> Result<Vec<NodeId>> {
    let mut plan = AttackPlan::new(Strength::Complete, Selection::Targeted);
    plan.qof_fraction = qof_fraction;
    let kind = if remove_attacked {
        CascadeKind::RemoveAttacked
    } else {
        CascadeKind::DegradeAttacked
    };
    cascade_inner(graph, attacked, kind, &plan, &BTreeMap::new())
}

struct Engine<'a> {
    graph: ProcessGraph,
    plan: &'a AttackPlan,
    rng: ChaCha8Rng,
    hits: BTreeMap<NodeId, HitState>,
    static_ranking: Vec<NodeId>,
}

impl<'a> Engine<'a> {
    fn new(graph: &ProcessGraph, plan: &'a AttackPlan) -> Result<Self> {
        if !graph.is_frozen() {
            return Err(Error::NotFrozen);
        }
        plan.validate()?;
        if graph.node_count() <= plan.stop_at_nodes {
            return Err(Error::GraphTooSmall {
                nodes: graph.node_count(),
                stop_at: plan.stop_at_nodes,
            });
        }
        let static_ranking = if plan.selection == Selection::Targeted
            && plan.ranking_mode == RankingMode::Static
        {
            centrality::ranking(graph, plan.basis)?
                .into_iter()
                .map(|(id, _)| id)
                .collect()
        } else {
            Vec::new()
        };
        Ok(Engine {
            graph: graph.clone(),
            plan,
            rng: ChaCha8Rng::seed_from_u64(plan.seed),
            hits: BTreeMap::new(),
            static_ranking,
        })
    }

    fn select_next(&mut self) -> Result<NodeId> {
        let survivors: Vec<NodeId> = self.graph.node_ids().collect();
        if survivors.is_empty() {
            return Err(Error::GraphTooSmall { nodes: 0, stop_at: 0 });
        }
        match self.plan.selection {
            Selection::Random => {
                let idx = self.rng.random_range(0..survivors.len());
                Ok(survivors[idx])
            }
            Selection::Targeted => match self.plan.ranking_mode {
                RankingMode::Static => self
                    .static_ranking
                    .iter()
                    .copied()
                    .find(|id| self.graph.contains(*id))
                    .ok_or_else(|| Error::InvalidPlan("static ranking exhausted".into())),
                RankingMode::Adaptive => {
                    let ranked = centrality::ranking(&self.graph, self.plan.basis)?;
                    Ok(ranked[0].0)
                }
            },
        }
    }

    fn register_hit(&mut self, id: NodeId) {
        match self.plan.step_mode {
            StepMode::Fixed => {
                let e = self.hits.entry(id).or_insert(HitState::Count(0));
                if let HitState::Count(k) = e {
                    *k += 1;
                }
            }
            StepMode::Uniform { min, max } => {
                let draw = self.rng.random_range(min..=max);
                let e = self.hits.entry(id).or_insert(HitState::Accum(0.0));
                if let HitState::Accum(a) = e {
                    *a += draw;
                }
            }
        }
    }

    /// Upper bound on stages before declaring the run stuck. A complete
    /// attack removes a node per stage; a partial attack fully silences a
    /// node within ceil(1/step) hits.
    fn stage_cap(&self) -> usize {
        let n = self.graph.node_count();
        match self.plan.strength {
            Strength::Complete => n + 1,
            Strength::Partial => {
                let min_step = match self.plan.step_mode {
                    StepMode::Fixed => self.plan.partial_step,
                    StepMode::Uniform { min, .. } => min,
                };
                n * ((1.0 / min_step).ceil() as usize + 1) + 16
            }
        }
    }
}

/// Runs a full attack, leaving `graph` untouched.
pub fn run_attack(graph: &ProcessGraph, plan: &AttackPlan) -> Result<PercolationTrace> {
    run_attack_observed(graph, plan, |_, _| Ok(()))
}

pub fn run_complete_attack(graph: &ProcessGraph, plan: &AttackPlan) -> Result<PercolationTrace> {
    if plan.strength != Strength::Complete {
        return Err(Error::InvalidPlan("plan strength is not `complete`".into()));
    }
    run_attack(graph, plan)
}

pub fn run_partial_attack(graph: &ProcessGraph, plan: &AttackPlan) -> Result<PercolationTrace> {
    if plan.strength != Strength::Partial {
        return Err(Error::InvalidPlan("plan strength is not `partial`".into()));
    }
    run_attack(graph, plan)
}

/// Like [`run_attack`] but calls `on_stage` with the residual graph after
/// the baseline (stage 0) and after every attack stage. Lets callers sample
/// fragment distributions mid-run without keeping every residual graph.
pub fn run_attack_observed(
    graph: &ProcessGraph,
    plan: &AttackPlan,
    mut on_stage: impl FnMut(u32, &ProcessGraph) -> Result<()>,
) -> Result<PercolationTrace> {
    let mut engine = Engine::new(graph, plan)?;
    let stage0 = StageRecord::at(0, None, Vec::new(), metrics::snapshot(&engine.graph)?);
    on_stage(0, &engine.graph)?;
    let stage_cap = engine.stage_cap();
    let mut stages = Vec::new();
    let mut stage: u32 = 0;
    while engine.graph.node_count() > engine.plan.stop_at_nodes {
        stage += 1;
        if stage as usize > stage_cap {
            return Err(Error::NonConvergence {
                what: "attack loop (no further node can be removed)".into(),
                iterations: stage_cap,
            });
        }
        let victim = engine.select_next()?;
        let removed = match engine.plan.strength {
            Strength::Complete => cascade_inner(
                &mut engine.graph,
                victim,
                CascadeKind::RemoveAttacked,
                engine.plan,
                &engine.hits,
            )?,
            Strength::Partial => {
                engine.register_hit(victim);
                cascade_inner(
                    &mut engine.graph,
                    victim,
                    CascadeKind::DegradeAttacked,
                    engine.plan,
                    &engine.hits,
                )?
            }
        };
        on_stage(stage, &engine.graph)?;
        stages.push(StageRecord::at(
            stage,
            Some(victim),
            removed,
            metrics::snapshot(&engine.graph)?,
        ));
    }
    Ok(PercolationTrace {
        plan: engine.plan.clone(),
        stage0,
        stages,
    })
}
