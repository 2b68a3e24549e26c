//! Command-line runner for interdependent-utility-network studies.
//!
//! `build` turns a scenario document into frozen graph CSVs; `attack`,
//! `campaign`, `optimize`, and `centrality` consume those CSVs; `rerun`
//! replays any recorded run from its manifest. Flag defaults match the
//! library type defaults, so a bare `campaign` runs the standard 10000
//! trials at quality-of-function 0.5.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use iun_core::{
    AttackPlan, Basis, CampaignSpec, Metric, OptimizationSpec, RankingMode, SearchMode, Selection,
    StepMode, Strength,
};

mod commands;
mod manifest;

#[derive(Parser)]
#[command(name = "iun", version, about = "Interdependent utility network robustness toolkit")]
struct Cli {
    /// Worker threads for trials and searches. Outputs never depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve a scenario document into frozen graph CSVs.
    Build(BuildArgs),
    /// Run one staged attack and write the trace.
    Attack(AttackArgs),
    /// Repeat an attack plan over seeded trials and summarize.
    Campaign(CampaignArgs),
    /// Search dependency-weight assignments for the most robust graph.
    Optimize(OptimizeArgs),
    /// Score every node under a centrality basis.
    Centrality(CentralityArgs),
    /// Replay a recorded run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Output directory. Defaults to $IUN_OUT_ROOT/<command>, with the
    /// root falling back to ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite a directory that already holds a recorded run.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BuildArgs {
    /// Scenario JSON document.
    scenario: PathBuf,
    /// Rescale declared in-weights whose sum is off one instead of
    /// rejecting the scenario.
    #[arg(long)]
    auto_normalize: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum StepModeName {
    /// Every hit removes the same output fraction.
    Fixed,
    /// Each hit draws its fraction from [--step-min, --step-max].
    Uniform,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, default_value = "complete")]
    strength: Strength,
    #[arg(long, default_value = "targeted")]
    selection: Selection,
    /// Scoring basis for targeted selection.
    #[arg(long, default_value = "weighted-out-degree")]
    basis: Basis,
    /// static ranks once up front; adaptive re-ranks every stage.
    #[arg(long, default_value = "static")]
    ranking_mode: RankingMode,
    /// Output fraction removed per hit in partial mode.
    #[arg(long, alias = "step", default_value_t = 0.2)]
    partial_step: f64,
    #[arg(long, value_enum, default_value_t = StepModeName::Fixed)]
    step_mode: StepModeName,
    #[arg(long)]
    step_min: Option<f64>,
    #[arg(long)]
    step_max: Option<f64>,
    /// Quality-of-function threshold for cascade removal; nodes may carry
    /// their own override.
    #[arg(long, default_value_t = 0.5)]
    qof_fraction: f64,
    /// Removal threshold for the directly attacked node in partial mode;
    /// defaults to the quality-of-function threshold.
    #[arg(long)]
    acceptable_service_fraction: Option<f64>,
    /// Stop once this few nodes survive.
    #[arg(long, default_value_t = 2)]
    stop_at_nodes: usize,
    /// Allow exploratory centrality bases for targeted selection.
    #[arg(long)]
    allow_extended_basis: bool,
}

impl PlanArgs {
    fn to_plan(&self, seed: u64) -> Result<AttackPlan> {
        let mut plan = AttackPlan::new(self.strength, self.selection)
            .with_basis(self.basis)
            .with_seed(seed);
        plan.ranking_mode = self.ranking_mode;
        plan.partial_step = self.partial_step;
        plan.step_mode = match self.step_mode {
            StepModeName::Fixed => {
                if self.step_min.is_some() || self.step_max.is_some() {
                    bail!("--step-min/--step-max only apply with --step-mode uniform");
                }
                StepMode::Fixed
            }
            StepModeName::Uniform => match (self.step_min, self.step_max) {
                (Some(min), Some(max)) => StepMode::Uniform { min, max },
                _ => bail!("--step-mode uniform needs both --step-min and --step-max"),
            },
        };
        plan.qof_fraction = self.qof_fraction;
        plan.acceptable_service_fraction = self.acceptable_service_fraction;
        plan.stop_at_nodes = self.stop_at_nodes;
        plan.allow_extended_basis = self.allow_extended_basis;
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Args)]
struct AttackArgs {
    /// Directory holding nodes.csv and edges.csv.
    graph: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CampaignArgs {
    /// Directory holding nodes.csv and edges.csv.
    graph: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, default_value_t = 10_000)]
    trials: u32,
    /// Metrics to track, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "lcc,ncc,fr,sr")]
    metrics: Vec<Metric>,
    /// Degradation levels in percent, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "20,50,80")]
    levels: Vec<u8>,
    /// Trial k runs with seed <seed-base> + k.
    #[arg(long, visible_alias = "seed", default_value_t = 0)]
    seed_base: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Directory holding nodes.csv and edges.csv.
    graph: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    /// Robustness metric the objective tracks.
    #[arg(long, default_value = "sr")]
    metric: Metric,
    /// Degradation level in percent the objective counts stages to.
    #[arg(long, default_value_t = 80)]
    level: u8,
    #[arg(long, default_value = "exhaustive")]
    mode: SearchMode,
    /// Assignments drawn in sampling mode.
    #[arg(long, default_value_t = 1_000)]
    samples: u64,
    /// Seed for sampling mode.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exhaustive mode refuses instances with more assignments than this.
    #[arg(long, default_value_t = 10_000_000)]
    cap: u128,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct CentralityArgs {
    /// Directory holding nodes.csv and edges.csv.
    graph: PathBuf,
    #[arg(long, default_value = "weighted-out-degree")]
    basis: Basis,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RerunArgs {
    /// Manifest of the run to replay.
    manifest: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    match cli.command {
        Command::Build(args) => {
            let dir = manifest::resolve_out(args.out.out.clone(), "build");
            manifest::prepare_out_dir(&dir, args.out.force)?;
            commands::build(&args.scenario, args.auto_normalize, &dir)
        }
        Command::Attack(args) => {
            let plan = args.plan.to_plan(args.seed)?;
            let dir = manifest::resolve_out(args.out.out.clone(), "attack");
            manifest::prepare_out_dir(&dir, args.out.force)?;
            commands::attack(&args.graph, &plan, &dir)
        }
        Command::Campaign(args) => {
            let spec = CampaignSpec {
                plan: args.plan.to_plan(0)?,
                trials: args.trials,
                metrics: args.metrics.clone(),
                levels: args.levels.clone(),
                seed_base: args.seed_base,
            };
            spec.validate()?;
            let dir = manifest::resolve_out(args.out.out.clone(), "campaign");
            manifest::prepare_out_dir(&dir, args.out.force)?;
            commands::campaign(&args.graph, &spec, &dir)
        }
        Command::Optimize(args) => {
            let spec = OptimizationSpec {
                metric: args.metric,
                level: args.level,
                plan: args.plan.to_plan(0)?,
                mode: args.mode,
                samples: args.samples,
                seed: args.seed,
                cap: args.cap,
            };
            spec.validate()?;
            let dir = manifest::resolve_out(args.out.out.clone(), "optimize");
            manifest::prepare_out_dir(&dir, args.out.force)?;
            commands::optimize(&args.graph, &spec, &dir)
        }
        Command::Centrality(args) => {
            let dir = manifest::resolve_out(args.out.out.clone(), "centrality");
            manifest::prepare_out_dir(&dir, args.out.force)?;
            commands::centrality(&args.graph, args.basis, &dir)
        }
        Command::Rerun(args) => {
            let dir = manifest::resolve_out(args.out.out.clone(), "rerun");
            manifest::prepare_out_dir(&dir, args.out.force)?;
            commands::rerun(&args.manifest, &dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
