//! Monte-Carlo attack campaigns and their report tables.
//!
//! A campaign repeats one attack plan over many seeds, aligns the metric
//! trajectories by stage, and summarizes stages-to-degradation per metric
//! and level. Trials run in parallel; results are merged by trial index,
//! so the jobs count never changes the output.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::ProcessGraph;
use crate::metrics::{self, Metric};
use crate::percolation::{run_attack, run_attack_observed, AttackPlan, Selection, Strength};

/// One attack plan, repeated. Trial `k` runs with seed `seed_base + k`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CampaignSpec {
    pub plan: AttackPlan,
    pub trials: u32,
    pub metrics: Vec<Metric>,
    /// Degradation levels in percent, e.g. 50 means "down to half the
    /// baseline value".
    pub levels: Vec<u8>,
    pub seed_base: u64,
}

impl CampaignSpec {
    pub fn new(plan: AttackPlan) -> Self {
        CampaignSpec {
            plan,
            trials: 10_000,
            metrics: Metric::ALL.to_vec(),
            levels: vec![20, 50, 80],
            seed_base: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidPlan("campaign needs at least one trial".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidPlan("campaign tracks no metrics".into()));
        }
        for &level in &self.levels {
            if level == 0 || level > 100 {
                return Err(Error::InvalidPlan(format!(
                    "degradation level {level} outside (0, 100]"
                )));
            }
        }
        self.plan.validate()
    }
}

/// Stage counts observed in a single trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub seed: u64,
    pub stages: u32,
    /// First stage reaching each (metric, level) target; `None` = never.
    pub to_degradation: BTreeMap<(Metric, u8), Option<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub stage: u32,
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    pub spec: CampaignSpec,
    /// Ordered by trial index.
    pub trials: Vec<TrialSummary>,
    pub trajectories: BTreeMap<Metric, Vec<TrajectoryPoint>>,
    /// Component-size histogram after each stage of the first trial,
    /// baseline included.
    pub fragments: Vec<(u32, BTreeMap<usize, usize>)>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Runs every trial of the campaign and aggregates the trajectories.
///
/// Shorter trials are padded with their terminal metric values so the
/// mean and percentile curves stay well defined at every stage.
pub fn run_campaign(graph: &ProcessGraph, spec: &CampaignSpec) -> Result<CampaignOutcome> {
    spec.validate()?;
    let runs: Vec<(TrialSummary, BTreeMap<Metric, Vec<f64>>)> = (0..spec.trials)
        .into_par_iter()
        .map(|k| {
            let mut plan = spec.plan.clone();
            plan.seed = spec.seed_base + u64::from(k);
            let trace = run_attack(graph, &plan)?;
            let mut curves: BTreeMap<Metric, Vec<f64>> = BTreeMap::new();
            for &metric in &spec.metrics {
                curves.insert(
                    metric,
                    trace.records().map(|r| metric.of(&r.metrics())).collect(),
                );
            }
            let mut to_degradation = BTreeMap::new();
            for &metric in &spec.metrics {
                for &level in &spec.levels {
                    to_degradation.insert(
                        (metric, level),
                        trace.stages_to_degradation(metric, f64::from(level)),
                    );
                }
            }
            let summary = TrialSummary {
                seed: plan.seed,
                stages: trace.final_record().stage,
                to_degradation,
            };
            Ok((summary, curves))
        })
        .collect::<Result<_>>()?;

    let longest = runs
        .iter()
        .flat_map(|(_, c)| c.values().map(Vec::len))
        .max()
        .unwrap_or(0);
    let mut trajectories = BTreeMap::new();
    for &metric in &spec.metrics {
        let mut points = Vec::with_capacity(longest);
        let mut column = Vec::with_capacity(runs.len());
        for stage in 0..longest {
            column.clear();
            for (_, curves) in &runs {
                let curve = &curves[&metric];
                column.push(curve.get(stage).or(curve.last()).copied().unwrap_or(0.0));
            }
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            column.sort_by(f64::total_cmp);
            points.push(TrajectoryPoint {
                stage: stage as u32,
                mean,
                p5: percentile(&column, 0.05),
                p95: percentile(&column, 0.95),
            });
        }
        trajectories.insert(metric, points);
    }

    let mut fragments = Vec::new();
    let mut first = spec.plan.clone();
    first.seed = spec.seed_base;
    run_attack_observed(graph, &first, |stage, g| {
        fragments.push((stage, metrics::fragment_distribution(g)));
        Ok(())
    })?;

    Ok(CampaignOutcome {
        spec: spec.clone(),
        trials: runs.into_iter().map(|(s, _)| s).collect(),
        trajectories,
        fragments,
    })
}

/// `stage,metric,mean,p5,p95`, grouped by metric.
pub fn write_trajectories<W: Write>(outcome: &CampaignOutcome, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "metric", "mean", "p5", "p95"])?;
    for (metric, points) in &outcome.trajectories {
        for p in points {
            w.write_record([
                p.stage.to_string(),
                metric.to_string(),
                format!("{}", p.mean),
                format!("{}", p.p5),
                format!("{}", p.p95),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A short name for a plan, used as the strategy column in tables.
pub fn strategy_label(plan: &AttackPlan) -> String {
    let strength = match plan.strength {
        Strength::Complete => "complete",
        Strength::Partial => "partial",
    };
    match plan.selection {
        Selection::Random => format!("{strength}-random"),
        Selection::Targeted => format!("{strength}-targeted-{}", plan.basis),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationRow {
    pub metric: Metric,
    pub level: u8,
    pub strategy: String,
    pub trials: u32,
    pub unreachable_trials: u32,
    /// Mean stages over the trials that reached the level, rounded to the
    /// nearest whole stage. `None` when no trial reached it.
    pub mean_stages: Option<f64>,
    pub median_stages: Option<f64>,
}

/// Stages-to-degradation summary across one or more campaigns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DegradationTable {
    pub rows: Vec<DegradationRow>,
}

impl DegradationTable {
    pub fn from_outcomes(groups: &[(String, &CampaignOutcome)]) -> Self {
        let mut rows = Vec::new();
        for (strategy, outcome) in groups {
            for &metric in &outcome.spec.metrics {
                for &level in &outcome.spec.levels {
                    let values: Vec<u32> = outcome
                        .trials
                        .iter()
                        .filter_map(|t| t.to_degradation[&(metric, level)])
                        .collect();
                    let unreachable = outcome.trials.len() - values.len();
                    rows.push(DegradationRow {
                        metric,
                        level,
                        strategy: strategy.clone(),
                        trials: outcome.trials.len() as u32,
                        unreachable_trials: unreachable as u32,
                        mean_stages: mean(&values).map(f64::round),
                        median_stages: median(&values),
                    });
                }
            }
        }
        rows.sort_by(|a, b| {
            (a.metric, a.level)
                .cmp(&(b.metric, b.level))
                .then_with(|| a.strategy.cmp(&b.strategy))
        });
        DegradationTable { rows }
    }

    /// `metric,level,strategy,trials,unreachable_trials,mean_stages,median_stages`;
    /// unreachable cells carry the word instead of a number.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "metric",
            "level",
            "strategy",
            "trials",
            "unreachable_trials",
            "mean_stages",
            "median_stages",
        ])?;
        for row in &self.rows {
            let cell = |v: Option<f64>| {
                v.map(|x| format!("{x}"))
                    .unwrap_or_else(|| "unreachable".to_string())
            };
            w.write_record([
                row.metric.to_string(),
                row.level.to_string(),
                row.strategy.clone(),
                row.trials.to_string(),
                row.unreachable_trials.to_string(),
                cell(row.mean_stages),
                cell(row.median_stages),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(values: &[u32]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().map(|&v| f64::from(v)).sum::<f64>() / values.len() as f64)
    }
}

fn median(values: &[u32]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        f64::from(sorted[mid])
    } else {
        (f64::from(sorted[mid - 1]) + f64::from(sorted[mid])) / 2.0
    })
}

/// Writes one `size,count` histogram per requested stage.
pub fn write_fragments<W: Write>(
    histogram: &BTreeMap<usize, usize>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["size", "count"])?;
    for (size, count) in histogram {
        w.write_record([size.to_string(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
