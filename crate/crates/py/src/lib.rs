//! Python bindings for the robustness toolkit. Wraps the frozen process
//! graph plus the attack, campaign, centrality, and optimizer entry points;
//! strings stand in for the Rust enums so callers can pass plain literals.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use iun_core::{
    build_graph_with, candidate_parents, cascade, centrality, graph_io, metrics, optimize,
    run_attack, run_campaign, AttackPlan, Basis, CampaignSpec, DegradationTable, Metric, NodeId,
    ObjectiveValue, OptimizationSpec, PercolationTrace, ProcessGraph, ScenarioConfig, SearchMode,
    Selection, StageRecord, Strength,
};

fn err(e: iun_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T>(what: &str, value: &str) -> PyResult<T>
where
    T: std::str::FromStr<Err = iun_core::Error>,
{
    value
        .parse()
        .map_err(|e: iun_core::Error| PyValueError::new_err(format!("{what}: {e}")))
}

fn record_dict<'py>(py: Python<'py>, record: &StageRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("stage", record.stage)?;
    d.set_item("attacked", record.attacked.map(|id| id.0))?;
    d.set_item(
        "cascade_removed",
        record.cascade_removed.iter().map(|id| id.0).collect::<Vec<u32>>(),
    )?;
    d.set_item("lcc", record.lcc)?;
    d.set_item("ncc", record.ncc)?;
    d.set_item("fr", record.fr)?;
    d.set_item("sr", record.sr)?;
    Ok(d)
}

/// One attack run: the stage-0 baseline plus every attack stage.
#[pyclass(name = "AttackTrace")]
struct PyAttackTrace {
    inner: PercolationTrace,
}

#[pymethods]
impl PyAttackTrace {
    /// Number of attack stages after the baseline.
    fn __len__(&self) -> usize {
        self.inner.stages.len()
    }

    /// All stage records as dicts, baseline first.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let out = PyList::empty(py);
        for record in self.inner.records() {
            out.append(record_dict(py, record)?)?;
        }
        Ok(out)
    }

    fn final_metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        record_dict(py, self.inner.final_record())
    }

    /// First stage at which `metric` lost `level` percent of its baseline,
    /// or None if the run never degraded that far.
    fn stages_to_degradation(&self, metric: &str, level: f64) -> PyResult<Option<u32>> {
        let metric: Metric = parse("metric", metric)?;
        Ok(self.inner.stages_to_degradation(metric, level))
    }
}

/// Frozen process-dependency graph.
#[pyclass(name = "Graph")]
struct PyGraph {
    inner: ProcessGraph,
}

impl PyGraph {
    fn plan_from(
        strength: &str,
        selection: &str,
        basis: &str,
        ranking: &str,
        seed: u64,
        step: f64,
        qof: f64,
        acceptable_service: Option<f64>,
    ) -> PyResult<AttackPlan> {
        let mut plan = AttackPlan::new(
            parse::<Strength>("strength", strength)?,
            parse::<Selection>("selection", selection)?,
        );
        plan.basis = parse::<Basis>("basis", basis)?;
        plan.ranking_mode = parse("ranking", ranking)?;
        plan.seed = seed;
        plan.partial_step = step;
        plan.qof_fraction = qof;
        plan.acceptable_service_fraction = acceptable_service;
        plan.validate().map_err(err)?;
        Ok(plan)
    }
}

#[pymethods]
impl PyGraph {
    /// Builds the graph from a scenario JSON file.
    #[staticmethod]
    #[pyo3(signature = (path, auto_normalize = false))]
    fn from_scenario(path: &str, auto_normalize: bool) -> PyResult<Self> {
        let config = ScenarioConfig::from_path(path).map_err(err)?;
        let (inner, _) = build_graph_with(&config, auto_normalize).map_err(err)?;
        Ok(PyGraph { inner })
    }

    /// Loads `nodes.csv` and `edges.csv` written by the command-line tool.
    #[staticmethod]
    fn from_run_dir(path: &str) -> PyResult<Self> {
        Ok(PyGraph {
            inner: graph_io::read_graph_dir(path).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    /// Node count the graph was frozen with; ratio metrics compare to it.
    fn original_node_count(&self) -> usize {
        self.inner.n_original()
    }

    fn node_ids(&self) -> Vec<u32> {
        self.inner.node_ids().map(|id| id.0).collect()
    }

    fn label(&self, id: u32) -> PyResult<String> {
        Ok(self.inner.node(NodeId(id)).map_err(err)?.label.clone())
    }

    fn sector(&self, id: u32) -> PyResult<String> {
        Ok(self
            .inner
            .node(NodeId(id))
            .map_err(err)?
            .sector
            .as_str()
            .to_owned())
    }

    /// Edges as (source, target, weight, original_weight) tuples.
    fn edges(&self) -> Vec<(u32, u32, f64, f64)> {
        self.inner
            .edges()
            .map(|e| (e.source.0, e.target.0, e.weight, e.original_weight))
            .collect()
    }

    fn copy(&self) -> Self {
        PyGraph {
            inner: self.inner.clone(),
        }
    }

    /// Current lcc / ncc / fr / sr of the surviving graph.
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let snap = metrics::snapshot(&self.inner).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("lcc", snap.lcc)?;
        d.set_item("ncc", snap.ncc)?;
        d.set_item("fr", snap.fr)?;
        d.set_item("sr", snap.sr)?;
        Ok(d)
    }

    fn centrality(&self, basis: &str) -> PyResult<BTreeMap<u32, f64>> {
        let basis: Basis = parse("basis", basis)?;
        let scores = centrality::scores(&self.inner, basis).map_err(err)?;
        Ok(scores.into_iter().map(|(id, s)| (id.0, s)).collect())
    }

    fn remove_node(&mut self, id: u32) -> PyResult<()> {
        self.inner.remove_node(NodeId(id)).map_err(err)
    }

    fn scale_out_edges(&mut self, id: u32, factor: f64) -> PyResult<()> {
        self.inner.scale_out_edges(NodeId(id), factor).map_err(err)
    }

    /// Applies one attack event in place and returns the ids removed by the
    /// resulting degradation cascade.
    #[pyo3(signature = (id, remove = true, qof = 0.5))]
    fn cascade(&mut self, id: u32, remove: bool, qof: f64) -> PyResult<Vec<u32>> {
        let removed = cascade(&mut self.inner, NodeId(id), remove, qof).map_err(err)?;
        Ok(removed.into_iter().map(|id| id.0).collect())
    }

    /// Runs one staged attack against a copy of the graph.
    #[pyo3(signature = (
        strength = "complete", selection = "targeted", basis = "weighted-out-degree",
        ranking = "static", seed = 0, step = 0.2, qof = 0.5, acceptable_service = None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn attack(
        &self,
        strength: &str,
        selection: &str,
        basis: &str,
        ranking: &str,
        seed: u64,
        step: f64,
        qof: f64,
        acceptable_service: Option<f64>,
    ) -> PyResult<PyAttackTrace> {
        let plan = Self::plan_from(
            strength,
            selection,
            basis,
            ranking,
            seed,
            step,
            qof,
            acceptable_service,
        )?;
        Ok(PyAttackTrace {
            inner: run_attack(&self.inner, &plan).map_err(err)?,
        })
    }

    /// Repeats an attack plan over seeded trials; returns one dict per
    /// metric and degradation level with mean and median stage counts.
    #[pyo3(signature = (
        strength = "complete", selection = "random", basis = "weighted-out-degree",
        trials = 1000, seed_base = 0, step = 0.2, qof = 0.5,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn campaign<'py>(
        &self,
        py: Python<'py>,
        strength: &str,
        selection: &str,
        basis: &str,
        trials: u32,
        seed_base: u64,
        step: f64,
        qof: f64,
    ) -> PyResult<Bound<'py, PyList>> {
        let plan = Self::plan_from(strength, selection, basis, "static", 0, step, qof, None)?;
        let mut spec = CampaignSpec::new(plan);
        spec.trials = trials;
        spec.seed_base = seed_base;
        spec.validate().map_err(err)?;
        let outcome = run_campaign(&self.inner, &spec).map_err(err)?;
        let label = iun_core::harness::strategy_label(&spec.plan);
        let table = DegradationTable::from_outcomes(&[(label, &outcome)]);
        let rows = PyList::empty(py);
        for row in &table.rows {
            let d = PyDict::new(py);
            d.set_item("metric", row.metric.as_str())?;
            d.set_item("level", row.level)?;
            d.set_item("strategy", &row.strategy)?;
            d.set_item("trials", row.trials)?;
            d.set_item("unreachable_trials", row.unreachable_trials)?;
            d.set_item("mean_stages", row.mean_stages)?;
            d.set_item("median_stages", row.median_stages)?;
            rows.append(d)?;
        }
        Ok(rows)
    }

    /// Searches dependency-weight assignments for the most attack-resistant
    /// reweighting. Returns the best assignment and its objective.
    #[pyo3(signature = (metric = "sr", level = 80, mode = "exhaustive", samples = 1000, seed = 0))]
    fn optimize<'py>(
        &self,
        py: Python<'py>,
        metric: &str,
        level: u8,
        mode: &str,
        samples: u64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut spec = OptimizationSpec::default();
        spec.metric = parse("metric", metric)?;
        spec.level = level;
        spec.mode = parse::<SearchMode>("mode", mode)?;
        spec.samples = samples;
        spec.seed = seed;
        spec.validate().map_err(err)?;
        let outcome = optimize(&self.inner, &spec).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("stages", outcome.objective.stage_count())?;
        d.set_item(
            "degraded",
            matches!(outcome.objective, ObjectiveValue::Reached(_)),
        )?;
        d.set_item("evaluations", outcome.log.len())?;
        let assignment = PyDict::new(py);
        for (node, tenths) in outcome.best.tenths() {
            assignment.set_item(node.0, tenths.clone())?;
        }
        d.set_item("assignment", assignment)?;
        Ok(d)
    }

    /// Nodes with two or more parents, the ones weight search can adjust.
    fn adjustable_nodes(&self) -> PyResult<BTreeMap<u32, Vec<u32>>> {
        let candidates = candidate_parents(&self.inner).map_err(err)?;
        Ok(candidates
            .into_iter()
            .map(|(id, parents)| (id.0, parents.into_iter().map(|p| p.0).collect()))
            .collect())
    }
}

#[pymodule]
fn iun_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyAttackTrace>()?;
    Ok(())
}
