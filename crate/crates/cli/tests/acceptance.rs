//! Release gate. One test per acceptance check, each with its own oracle
//! implemented from the definitions rather than the library internals.
//! Run with `--nocapture` to see the measured numbers behind each verdict.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use iun_core::{
    build_graph, cascade, candidate_parents, optimize, run_attack, run_campaign, snapshot,
    AttackPlan, Basis, CampaignSpec, Metric, NodeId, ObjectiveValue, OptimizationSpec,
    PercolationTrace, ProcessGraph, ProcessNode, ScenarioConfig, SearchMode, Sector, Selection,
    Strength,
};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn bundled_graph(name: &str) -> ProcessGraph {
    let config = ScenarioConfig::from_path(scenario(name)).expect("bundled scenario parses");
    build_graph(&config).expect("bundled scenario builds").0
}

/// Random frozen digraph with `min..=max` nodes and normalized in-weights.
fn random_graph(rng: &mut ChaCha8Rng, min: u32, max: u32) -> ProcessGraph {
    let n = rng.random_range(min..=max);
    let mut g = ProcessGraph::new();
    for id in 1..=n {
        g.add_node(ProcessNode::new(id, format!("node {id}"), Sector::Other))
            .unwrap();
    }
    let p = rng.random_range(0.15..0.45);
    for s in 1..=n {
        for t in 1..=n {
            if s != t && rng.random_bool(p) {
                g.add_edge(NodeId(s), NodeId(t), rng.random_range(0.05..1.0))
                    .unwrap();
            }
        }
    }
    g.normalize_incoming().unwrap();
    g.freeze().unwrap();
    g
}

// ---------------------------------------------------------------------------
// Check 1: component metrics against a union-find oracle.

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// (lcc, ncc, fr) by direct component enumeration over the survivors.
fn component_oracle(graph: &ProcessGraph) -> (usize, usize, f64) {
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let index: BTreeMap<NodeId, usize> =
        ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut uf = UnionFind::new(ids.len());
    for e in graph.edges() {
        uf.union(index[&e.source], index[&e.target]);
    }
    let mut sizes: BTreeMap<usize, u64> = BTreeMap::new();
    for i in 0..ids.len() {
        *sizes.entry(uf.find(i)).or_insert(0) += 1;
    }
    let lcc = sizes.values().max().copied().unwrap_or(0) as usize;
    let ncc = sizes.len();
    let n = graph.n_original() as u64;
    let fr = if n <= 1 {
        if ids.is_empty() {
            0.0
        } else {
            1.0
        }
    } else {
        let pairs: u64 = sizes.values().map(|&s| s * (s - 1)).sum();
        pairs as f64 / (n * (n - 1)) as f64
    };
    (lcc, ncc, fr)
}

fn service_oracle(graph: &ProcessGraph) -> f64 {
    let total = graph.total_original_out_weight();
    if total == 0.0 {
        return if graph.node_count() > 0 { 1.0 } else { 0.0 };
    }
    let current: f64 = graph.edges().map(|e| e.weight).sum();
    current / total
}

#[test]
fn metrics_match_brute_force_component_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let started = Instant::now();
    for case in 0..1000 {
        let mut graph = random_graph(&mut rng, 1, 12);
        let ids: Vec<NodeId> = graph.node_ids().collect();
        for &id in &ids {
            if rng.random_bool(0.3) {
                graph
                    .scale_out_edges(id, rng.random_range(0.0..1.0))
                    .unwrap();
            }
        }
        let mut alive = ids.clone();
        while alive.len() > 1 && rng.random_bool(0.25) {
            let at = rng.random_range(0..alive.len());
            graph.remove_node(alive.swap_remove(at)).unwrap();
        }

        let snap = snapshot(&graph).unwrap();
        let (lcc, ncc, fr) = component_oracle(&graph);
        assert_eq!(snap.lcc, lcc, "case {case}: lcc");
        assert_eq!(snap.ncc, ncc, "case {case}: ncc");
        assert_eq!(snap.fr, fr, "case {case}: fr");
        let sr = service_oracle(&graph);
        assert!(
            (snap.sr - sr).abs() <= 1e-12,
            "case {case}: sr {} vs oracle {sr}",
            snap.sr
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "metric oracle sweep took {elapsed:.2?}"
    );
    println!("PASS metrics: 1000 random graphs match the component oracle in {elapsed:.2?}");
}

// ---------------------------------------------------------------------------
// Check 2: cascade against an independent fixed-point simulator.

struct CascadeOracle {
    alive: BTreeSet<NodeId>,
    removed: BTreeSet<NodeId>,
    factor: BTreeMap<NodeId, f64>,
}

/// Replays one attack event by iterating the degradation equations to a
/// fixed point, sweeping in reverse id order to show order independence.
fn cascade_oracle(
    graph: &ProcessGraph,
    attacked: NodeId,
    remove_attacked: bool,
    qof: f64,
) -> CascadeOracle {
    let ids: Vec<NodeId> = graph.node_ids().collect();
    let mut incoming: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
    let mut outgoing: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
    for &id in &ids {
        incoming.insert(id, Vec::new());
        outgoing.insert(id, Vec::new());
    }
    for e in graph.edges() {
        incoming.get_mut(&e.target).unwrap().push((e.source, e.original_weight));
        outgoing.get_mut(&e.source).unwrap().push((e.target, e.original_weight));
    }

    let mut factor: BTreeMap<NodeId, f64> = BTreeMap::new();
    for &id in &ids {
        let f = outgoing[&id]
            .iter()
            .find(|&&(_, w)| w > 0.0)
            .map(|&(t, w)| graph.edge_weight(id, t).unwrap() / w)
            .unwrap_or(1.0);
        factor.insert(id, f);
    }

    let mut reach: BTreeSet<NodeId> = BTreeSet::new();
    let mut frontier = vec![attacked];
    while let Some(n) = frontier.pop() {
        for &(t, _) in &outgoing[&n] {
            if t != attacked && reach.insert(t) {
                frontier.push(t);
            }
        }
    }
    let mut domain: Vec<NodeId> = reach.iter().copied().collect();
    if !remove_attacked {
        domain.push(attacked);
    }
    domain.sort();
    domain.reverse();

    let mut alive: BTreeSet<NodeId> = ids.iter().copied().collect();
    let mut removed = BTreeSet::new();
    if remove_attacked {
        alive.remove(&attacked);
    }

    for sweep in 0.. {
        assert!(sweep < 10_000, "oracle failed to converge");
        let mut changed = false;
        for &v in &domain {
            if !alive.contains(&v) {
                continue;
            }
            let node = graph.node(v).unwrap();
            let mut in_w = 0.0;
            for &(p, w) in &incoming[&v] {
                if alive.contains(&p) {
                    in_w += w * factor[&p];
                }
            }
            let ratio = if node.original_in_weight() > 0.0 {
                (in_w / node.original_in_weight()).clamp(0.0, 1.0)
            } else {
                1.0
            };
            if (factor[&v] - ratio).abs() > 1e-12 {
                factor.insert(v, ratio);
                changed = true;
            }
            let mut out_w = 0.0;
            for &(c, w) in &outgoing[&v] {
                if alive.contains(&c) {
                    out_w += w * factor[&v];
                }
            }
            let threshold = node.qof_fraction.unwrap_or(qof);
            let starved = node.original_in_weight() > 0.0 && in_w == 0.0;
            let below =
                node.original_out_weight() > 0.0 && out_w < threshold * node.original_out_weight();
            if starved || below {
                alive.remove(&v);
                if v != attacked {
                    removed.insert(v);
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    CascadeOracle {
        alive,
        removed,
        factor,
    }
}

fn check_cascade_against_oracle(graph: &mut ProcessGraph, attacked: NodeId, remove: bool, qof: f64) {
    let expected = cascade_oracle(graph, attacked, remove, qof);
    let removed = cascade(graph, attacked, remove, qof).unwrap();
    let removed: BTreeSet<NodeId> = removed.into_iter().collect();
    assert_eq!(removed, expected.removed, "cascade removal set");
    let alive: BTreeSet<NodeId> = graph.node_ids().collect();
    assert_eq!(alive, expected.alive, "survivor set");
    for e in graph.edges() {
        let want = e.original_weight * expected.factor[&e.source];
        assert!(
            (e.weight - want).abs() <= 1e-9,
            "edge {} -> {}: weight {} vs oracle {want}",
            e.source,
            e.target,
            e.weight
        );
    }
}

/// Frozen graph for one exhaustive edge configuration: each ordered pair
/// carries no edge, weight 0.5, or weight 1.0 per its base-3 digit.
fn coded_graph(n: u32, mut code: u64) -> ProcessGraph {
    let mut g = ProcessGraph::new();
    for id in 1..=n {
        g.add_node(ProcessNode::new(id, format!("node {id}"), Sector::Other))
            .unwrap();
    }
    for s in 1..=n {
        for t in 1..=n {
            if s == t {
                continue;
            }
            match code % 3 {
                1 => g.add_edge(NodeId(s), NodeId(t), 0.5).unwrap(),
                2 => g.add_edge(NodeId(s), NodeId(t), 1.0).unwrap(),
                _ => {}
            }
            code /= 3;
        }
    }
    g.normalize_incoming().unwrap();
    g.freeze().unwrap();
    g
}

fn cascade_cases(graph: &ProcessGraph) {
    for qof in [0.25, 0.5, 0.75] {
        for attacked in graph.node_ids() {
            let mut g = graph.clone();
            check_cascade_against_oracle(&mut g, attacked, true, qof);
            let survivor = g.node_ids().next();
            if let Some(next) = survivor {
                check_cascade_against_oracle(&mut g, next, false, qof);
            }
        }
    }
}

#[test]
fn cascade_matches_independent_fixed_point_oracle() {
    let started = Instant::now();
    let mut cases = 0u64;
    for n in 1..=3u32 {
        let pairs = n * (n - 1);
        for code in 0..3u64.pow(pairs) {
            cascade_cases(&coded_graph(n, code));
            cases += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for n in 4..=6u32 {
        let pairs = n * (n - 1);
        for _ in 0..500 {
            let code = rng.random_range(0..3u64.pow(pairs));
            cascade_cases(&coded_graph(n, code));
            cases += 1;
        }
    }
    println!(
        "PASS cascade: {cases} graphs, zero oracle mismatches in {:.2?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Check 3: metric monotonicity over complete attacks.

#[test]
fn complete_attack_metrics_are_monotonic() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..500 {
        let graph = random_graph(&mut rng, 4, 12);
        let selection = if case % 2 == 0 {
            Selection::Random
        } else {
            Selection::Targeted
        };
        let mut plan = AttackPlan::new(Strength::Complete, selection).with_seed(rng.random());
        plan.qof_fraction = rng.random_range(0.1..0.9);
        let trace = run_attack(&graph, &plan).unwrap();
        let records: Vec<_> = trace.records().collect();
        for w in records.windows(2) {
            assert!(w[1].lcc <= w[0].lcc, "case {case}: lcc grew");
            assert!(w[1].fr <= w[0].fr, "case {case}: fr grew");
            assert!(w[1].sr <= w[0].sr, "case {case}: sr grew");
        }
        let peak = records.iter().map(|r| r.ncc).max().unwrap();
        let last = records.last().unwrap().ncc;
        assert!(last <= peak, "case {case}: ncc ended above its peak");
    }
    println!("PASS monotonicity: 500 complete attacks, lcc/fr/sr never rose");
}

// ---------------------------------------------------------------------------
// Check 4: targeted beats random on the bundled synthetic network.

#[test]
fn targeted_attacks_beat_random_on_bundled_network() {
    let graph = bundled_graph("synthetic-iun.json");

    let stages_for = |basis: Basis| {
        let plan = AttackPlan::new(Strength::Complete, Selection::Targeted).with_basis(basis);
        run_attack(&graph, &plan)
            .unwrap()
            .stages_to_degradation(Metric::Fr, 50.0)
            .expect("targeted attack degrades the bundled network")
    };
    let od = stages_for(Basis::WeightedOutDegree);
    let bw = stages_for(Basis::Betweenness);

    let mut spec = CampaignSpec::new(AttackPlan::new(Strength::Complete, Selection::Random));
    spec.seed_base = 4;
    assert_eq!(spec.trials, 10_000);
    let started = Instant::now();
    let outcome = run_campaign(&graph, &spec).unwrap();
    let elapsed = started.elapsed();
    let mut sum = 0.0;
    for trial in &outcome.trials {
        let stages = trial.to_degradation[&(Metric::Fr, 50)]
            .expect("every random trial degrades the bundled network");
        sum += f64::from(stages);
    }
    let random_mean = sum / f64::from(spec.trials);

    assert!(od <= bw, "expected od {od} <= bw {bw}");
    assert!(
        f64::from(bw) <= random_mean,
        "expected bw {bw} <= random mean {random_mean:.2}"
    );
    assert!(
        random_mean >= 2.0 * f64::from(od),
        "expected random mean {random_mean:.2} >= 2x od {od}"
    );
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "10k-trial campaign took {elapsed:.2?}"
    );
    println!(
        "PASS ordering: stages to 50% flow loss od={od} bw={bw} random mean={random_mean:.2}, \
         10k trials in {elapsed:.2?}"
    );
}

// ---------------------------------------------------------------------------
// Check 5: partial attacks survive at least as long as complete ones.

/// `None` counts as "never degraded", which outlasts any finite count.
fn outlasts(partial: Option<u32>, complete: Option<u32>) -> bool {
    match (partial, complete) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(p), Some(c)) => p >= c,
    }
}

fn mean_stages(outcome: &iun_core::CampaignOutcome, metric: Metric, level: u8) -> f64 {
    let mut sum = 0.0;
    for trial in &outcome.trials {
        match trial.to_degradation[&(metric, level)] {
            Some(stages) => sum += f64::from(stages),
            None => return f64::INFINITY,
        }
    }
    sum / outcome.trials.len() as f64
}

#[test]
fn partial_attacks_survive_at_least_as_long_as_complete() {
    let graph = bundled_graph("synthetic-iun.json");
    let levels = [20u8, 50, 80];

    for basis in [Basis::WeightedOutDegree, Basis::Betweenness] {
        let complete = run_attack(
            &graph,
            &AttackPlan::new(Strength::Complete, Selection::Targeted).with_basis(basis),
        )
        .unwrap();
        let partial = run_attack(
            &graph,
            &AttackPlan::new(Strength::Partial, Selection::Targeted).with_basis(basis),
        )
        .unwrap();
        for metric in Metric::ALL {
            for level in levels {
                let c = complete.stages_to_degradation(metric, f64::from(level));
                let p = partial.stages_to_degradation(metric, f64::from(level));
                assert!(
                    outlasts(p, c),
                    "{basis:?} {metric:?} {level}%: partial {p:?} vs complete {c:?}"
                );
            }
        }
    }

    let mut complete_spec = CampaignSpec::new(AttackPlan::new(Strength::Complete, Selection::Random));
    complete_spec.trials = 2_000;
    complete_spec.seed_base = 5;
    let mut partial_spec = complete_spec.clone();
    partial_spec.plan = AttackPlan::new(Strength::Partial, Selection::Random);
    let complete = run_campaign(&graph, &complete_spec).unwrap();
    let partial = run_campaign(&graph, &partial_spec).unwrap();
    for metric in Metric::ALL {
        for level in levels {
            let c = mean_stages(&complete, metric, level);
            let p = mean_stages(&partial, metric, level);
            assert!(
                p >= c,
                "random {metric:?} {level}%: partial mean {p:.2} vs complete mean {c:.2}"
            );
        }
    }
    println!("PASS endurance: partial attacks outlasted complete at every level");
}

// ---------------------------------------------------------------------------
// Check 6: a unit-step partial attack is exactly a complete attack.

#[test]
fn unit_step_partial_attack_reduces_to_complete() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for case in 0..100 {
        let graph = random_graph(&mut rng, 4, 12);
        let seed = rng.random();
        for selection in [Selection::Random, Selection::Targeted] {
            let complete = AttackPlan::new(Strength::Complete, selection).with_seed(seed);
            let mut partial = AttackPlan::new(Strength::Partial, selection).with_seed(seed);
            partial.partial_step = 1.0;
            partial.acceptable_service_fraction = Some(partial.qof_fraction);
            let a: PercolationTrace = run_attack(&graph, &complete).unwrap();
            let b = run_attack(&graph, &partial).unwrap();
            assert_eq!(a.stage0, b.stage0, "case {case} {selection:?}: baseline");
            assert_eq!(a.stages, b.stages, "case {case} {selection:?}: stages");
        }
    }
    println!("PASS limiting case: unit-step partial traces equal complete traces on 100 graphs");
}

// ---------------------------------------------------------------------------
// Check 7: optimizer against full replay and a random-assignment baseline.

fn compositions_of_ten(parts: usize) -> Vec<Vec<u8>> {
    fn rec(left: u8, parts: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(left - v, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(10, parts, &mut Vec::new(), &mut out);
    out
}

/// Two root suppliers feeding two adjustable two-parent nodes, each with a
/// dependent sink. 11 x 11 = 121 grid assignments.
fn toy_graph() -> ProcessGraph {
    let mut g = ProcessGraph::new();
    for id in 1..=6u32 {
        g.add_node(ProcessNode::new(id, format!("node {id}"), Sector::Other))
            .unwrap();
    }
    g.add_edge(NodeId(1), NodeId(3), 0.6).unwrap();
    g.add_edge(NodeId(2), NodeId(3), 0.4).unwrap();
    g.add_edge(NodeId(1), NodeId(4), 0.5).unwrap();
    g.add_edge(NodeId(2), NodeId(4), 0.5).unwrap();
    g.add_edge(NodeId(3), NodeId(5), 1.0).unwrap();
    g.add_edge(NodeId(4), NodeId(6), 1.0).unwrap();
    g.freeze().unwrap();
    g
}

fn replay_objective(
    graph: &ProcessGraph,
    overrides: &BTreeMap<(NodeId, NodeId), f64>,
    spec: &OptimizationSpec,
) -> ObjectiveValue {
    let reweighted = graph.reweighted(overrides).unwrap();
    let trace = run_attack(&reweighted, &spec.plan).unwrap();
    match trace.stages_to_degradation(spec.metric, f64::from(spec.level)) {
        Some(stage) => ObjectiveValue::Reached(stage),
        None => ObjectiveValue::Unreachable(trace.final_record().stage + 1),
    }
}

#[test]
fn optimizer_matches_full_replay_and_beats_random_median() {
    let toy = toy_graph();
    let spec = OptimizationSpec::default();
    let outcome = optimize(&toy, &spec).unwrap();

    let candidates = candidate_parents(&toy).unwrap();
    assert_eq!(candidates.len(), 2);
    let grids: Vec<Vec<Vec<u8>>> = candidates
        .iter()
        .map(|(_, parents)| compositions_of_ten(parents.len()))
        .collect();
    let mut best: Option<(ObjectiveValue, Vec<u8>)> = None;
    let mut assignments = 0u32;
    for first in &grids[0] {
        for second in &grids[1] {
            let mut overrides = BTreeMap::new();
            for (choice, (node, parents)) in [first, second].iter().zip(&candidates) {
                for (&parent, &tenths) in parents.iter().zip(choice.iter()) {
                    overrides.insert((parent, *node), f64::from(tenths) / 10.0);
                }
            }
            let objective = replay_objective(&toy, &overrides, &spec);
            let flat: Vec<u8> = first.iter().chain(second.iter()).copied().collect();
            if best.as_ref().is_none_or(|(b, _)| objective > *b) {
                best = Some((objective, flat));
            }
            assignments += 1;
        }
    }
    let (best_objective, best_flat) = best.unwrap();
    assert_eq!(assignments, 121);
    assert_eq!(outcome.objective, best_objective, "exhaustive optimum");
    assert_eq!(outcome.best.flattened(), best_flat, "tie-break order");

    let bundled = bundled_graph("synthetic-iun.json");
    let mut sampled_spec = OptimizationSpec::default();
    sampled_spec.mode = SearchMode::RandomSampling;
    sampled_spec.samples = 1_000;
    sampled_spec.seed = 7;
    let sampled = optimize(&bundled, &sampled_spec).unwrap();

    let candidates = candidate_parents(&bundled).unwrap();
    let grids: Vec<Vec<Vec<u8>>> = candidates
        .iter()
        .map(|(_, parents)| compositions_of_ten(parents.len()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut objectives: Vec<ObjectiveValue> = (0..200)
        .map(|_| {
            let mut overrides = BTreeMap::new();
            for ((node, parents), grid) in candidates.iter().zip(&grids) {
                let choice = &grid[rng.random_range(0..grid.len())];
                for (&parent, &tenths) in parents.iter().zip(choice.iter()) {
                    overrides.insert((parent, *node), f64::from(tenths) / 10.0);
                }
            }
            replay_objective(&bundled, &overrides, &sampled_spec)
        })
        .collect();
    objectives.sort();
    let median = objectives[99];
    assert!(
        sampled.objective >= median,
        "sampled best {:?} below random median {median:?}",
        sampled.objective
    );
    println!(
        "PASS optimizer: toy optimum {best_objective:?} over 121 assignments; \
         sampled best {:?} >= random median {median:?}",
        sampled.objective
    );
}

// ---------------------------------------------------------------------------
// Check 8: recorded runs replay byte-identically from their manifests.

fn iun(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_iun"))
        .args(args)
        .output()
        .expect("spawning iun");
    assert!(
        out.status.success(),
        "iun {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn csv_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

fn assert_identical_csvs(original: &Path, replay: &Path) {
    let names = csv_names(original);
    assert!(!names.is_empty(), "{} wrote no CSVs", original.display());
    assert_eq!(names, csv_names(replay), "replay wrote different files");
    for name in names {
        let a = std::fs::read(original.join(&name)).unwrap();
        let b = std::fs::read(replay.join(&name)).unwrap();
        assert!(a == b, "{name} differs between run and replay");
    }
}

#[test]
fn recorded_runs_replay_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name).to_str().unwrap().to_owned();
    let scenario_file = scenario("conceptual-iun.json");
    let scenario_file = scenario_file.to_str().unwrap();
    let started = Instant::now();

    iun(&["build", scenario_file, "--out", &dir("build")]);
    iun(&["attack", &dir("build"), "--out", &dir("attack")]);
    iun(&[
        "--jobs", "2", "campaign", &dir("build"), "--selection", "random",
        "--trials", "10000", "--seed-base", "3", "--out", &dir("campaign"),
    ]);
    iun(&[
        "optimize", &dir("build"), "--mode", "sampling", "--samples", "60",
        "--seed", "5", "--out", &dir("optimize"),
    ]);
    iun(&["centrality", &dir("build"), "--basis", "betweenness", "--out", &dir("centrality")]);

    for name in ["build", "attack", "campaign", "optimize", "centrality"] {
        let manifest = tmp.path().join(name).join("manifest.json");
        let replay = dir(&format!("replay-{name}"));
        iun(&["--jobs", "1", "rerun", manifest.to_str().unwrap(), "--out", &replay]);
        assert_identical_csvs(&tmp.path().join(name), Path::new(&replay));
    }

    let campaign_manifest = tmp.path().join("campaign/manifest.json");
    let wide = dir("replay-campaign-wide");
    iun(&["--jobs", "3", "rerun", campaign_manifest.to_str().unwrap(), "--out", &wide]);
    assert_identical_csvs(&tmp.path().join("campaign"), Path::new(&wide));

    println!(
        "PASS determinism: five commands replayed byte-identically in {:.2?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------------------
// Check 9: robustness formula spot checks.

#[test]
fn robustness_formula_spot_checks() {
    let intact = bundled_graph("conceptual-iun.json");
    let snap = snapshot(&intact).unwrap();
    assert_eq!(snap.fr, 1.0, "intact flow robustness");
    assert_eq!(snap.sr, 1.0, "intact service robustness");

    let mut split = ProcessGraph::new();
    for id in 1..=4u32 {
        split
            .add_node(ProcessNode::new(id, format!("node {id}"), Sector::Other))
            .unwrap();
    }
    split.add_edge(NodeId(1), NodeId(2), 1.0).unwrap();
    split.add_edge(NodeId(3), NodeId(4), 1.0).unwrap();
    split.freeze().unwrap();
    let snap = snapshot(&split).unwrap();
    assert_eq!(snap.fr, 1.0 / 3.0, "two 2-node components of four nodes");

    let mut halved = ProcessGraph::new();
    for id in 1..=3u32 {
        halved
            .add_node(ProcessNode::new(id, format!("node {id}"), Sector::Other))
            .unwrap();
    }
    halved.add_edge(NodeId(1), NodeId(2), 1.0).unwrap();
    halved.add_edge(NodeId(2), NodeId(3), 1.0).unwrap();
    halved.freeze().unwrap();
    for id in [NodeId(1), NodeId(2)] {
        halved.scale_out_edges(id, 0.5).unwrap();
    }
    let snap = snapshot(&halved).unwrap();
    assert_eq!(snap.sr, 0.5, "half-scaled out-edges");

    println!("PASS formulas: intact = 1, split quarters = 1/3, half-scaled = 0.5");
}
