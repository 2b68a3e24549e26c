//! Command bodies. Each reads its input, computes, and writes the full
//! output set plus exactly one manifest into the prepared directory.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use iun_core::{
    build_graph_with, graph_io, harness, optimizer, percolation, AttackPlan, Basis, CampaignSpec,
    DegradationTable, OptimizationSpec, ScenarioConfig,
};

use crate::manifest::{self, InputRef, RunManifest};

fn manifest_for(
    command: &str,
    input: InputRef,
    params: serde_json::Value,
    seeds: Vec<u64>,
    dir: &Path,
) -> RunManifest {
    RunManifest {
        tool: "iun".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        input,
        params,
        seeds,
        output_dir: dir.display().to_string(),
    }
}

fn create(dir: &Path, name: &str) -> Result<File> {
    File::create(dir.join(name)).with_context(|| format!("creating {}/{name}", dir.display()))
}

pub fn build(scenario: &Path, auto_normalize: bool, dir: &Path) -> Result<()> {
    let input = manifest::file_input(scenario)?;
    let text = std::fs::read_to_string(scenario)
        .with_context(|| format!("reading {}", scenario.display()))?;
    let config = ScenarioConfig::from_str(&text)?;
    let (graph, report) = build_graph_with(&config, auto_normalize)?;

    graph_io::write_graph_dir(&graph, dir)?;

    let mut derived = String::from("source,target\n");
    for (support, dependent) in &report.derived_edges {
        derived.push_str(&format!("{support},{dependent}\n"));
    }
    std::fs::write(dir.join("derived_dependencies.csv"), derived)?;

    let mut lines = Vec::new();
    for (sector, comps) in &report.sector_components {
        lines.push(format!("{sector} topology: {comps} component(s)"));
    }
    lines.extend(report.messages.iter().cloned());
    lines.push("validation passed".into());
    std::fs::write(dir.join("validation.txt"), lines.join("\n") + "\n")?;

    let params = serde_json::json!({ "auto_normalize": auto_normalize });
    manifest::write(dir, &manifest_for("build", input, params, vec![], dir))
}

pub fn attack(graph_dir: &Path, plan: &AttackPlan, dir: &Path) -> Result<()> {
    let input = manifest::graph_dir_input(graph_dir)?;
    let graph = graph_io::read_graph_dir(graph_dir)?;
    let trace = percolation::run_attack(&graph, plan)?;
    graph_io::write_trace(&trace, create(dir, "trace.csv")?)?;
    let params = serde_json::to_value(plan)?;
    manifest::write(
        dir,
        &manifest_for("attack", input, params, vec![plan.seed], dir),
    )
}

pub fn campaign(graph_dir: &Path, spec: &CampaignSpec, dir: &Path) -> Result<()> {
    let input = manifest::graph_dir_input(graph_dir)?;
    let graph = graph_io::read_graph_dir(graph_dir)?;
    let outcome = iun_core::run_campaign(&graph, spec)?;

    harness::write_trajectories(&outcome, create(dir, "trajectory.csv")?)?;
    let label = harness::strategy_label(&spec.plan);
    let table = DegradationTable::from_outcomes(&[(label, &outcome)]);
    table.write_csv(create(dir, "degradation_table.csv")?)?;
    for (stage, histogram) in &outcome.fragments {
        harness::write_fragments(histogram, create(dir, &format!("fragments_stage{stage}.csv"))?)?;
    }

    let params = serde_json::to_value(spec)?;
    manifest::write(
        dir,
        &manifest_for("campaign", input, params, vec![spec.seed_base], dir),
    )
}

pub fn optimize(graph_dir: &Path, spec: &OptimizationSpec, dir: &Path) -> Result<()> {
    let input = manifest::graph_dir_input(graph_dir)?;
    let graph = graph_io::read_graph_dir(graph_dir)?;
    let outcome = iun_core::optimize(&graph, spec)?;

    let improved = outcome.best.apply(&graph)?;
    graph_io::write_edges(&improved, create(dir, "best_assignment.csv")?)?;
    optimizer::write_search_log(&outcome.log, create(dir, "search_log.csv")?)?;

    let params = serde_json::to_value(spec)?;
    manifest::write(
        dir,
        &manifest_for(
            "optimize",
            input,
            params,
            vec![spec.seed, spec.plan.seed],
            dir,
        ),
    )
}

pub fn centrality(graph_dir: &Path, basis: Basis, dir: &Path) -> Result<()> {
    let input = manifest::graph_dir_input(graph_dir)?;
    let graph = graph_io::read_graph_dir(graph_dir)?;
    graph_io::write_scores(&graph, basis, create(dir, "scores.csv")?)?;
    let params = serde_json::json!({ "basis": basis });
    manifest::write(dir, &manifest_for("centrality", input, params, vec![], dir))
}

pub fn rerun(manifest_path: &Path, dir: &Path) -> Result<()> {
    let recorded = manifest::read(manifest_path)?;
    manifest::verify_input(&recorded.input)?;
    let input_path = Path::new(&recorded.input.path);
    match recorded.command.as_str() {
        "build" => {
            let auto = recorded
                .params
                .get("auto_normalize")
                .and_then(|v| v.as_bool())
                .unwrap_or(false);
            build(input_path, auto, dir)
        }
        "attack" => {
            let plan: AttackPlan = serde_json::from_value(recorded.params)?;
            attack(input_path, &plan, dir)
        }
        "campaign" => {
            let spec: CampaignSpec = serde_json::from_value(recorded.params)?;
            campaign(input_path, &spec, dir)
        }
        "optimize" => {
            let spec: OptimizationSpec = serde_json::from_value(recorded.params)?;
            optimize(input_path, &spec, dir)
        }
        "centrality" => {
            let basis: Basis = serde_json::from_value(
                recorded
                    .params
                    .get("basis")
                    .cloned()
                    .unwrap_or(serde_json::Value::Null),
            )?;
            centrality(input_path, basis, dir)
        }
        other => bail!("manifest records unknown command `{other}`"),
    }
}
