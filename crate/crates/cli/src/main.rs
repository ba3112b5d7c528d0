//! tcda: generate benchmark batches, score methods against ground
//! truth, and aggregate robustness profiles from the command line.

mod cmd;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use tcda_core::io::config;
use tcda_core::{Plan, ScheduleVariant};

#[derive(Parser)]
#[command(name = "tcda", version, about = "time-series causal discovery benchmark")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Benchmark plan (JSON).
    #[arg(long, global = true, env = "TCDA_CONFIG", value_name = "PLAN.json")]
    config: Option<PathBuf>,
    /// Overrides the plan's master seed.
    #[arg(long, global = true, env = "TCDA_SEED")]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long, global = true, env = "TCDA_JOBS")]
    jobs: Option<usize>,
    /// Level schedule variant: default | appendix.
    #[arg(long, global = true, env = "TCDA_SCHEDULE_VARIANT", value_name = "VARIANT")]
    schedule_variant: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generates sample batches with ground truth under an output root.
    Gen(GenArgs),
    /// Scores the baseline grid (or external predictions) into a results CSV.
    Evaluate(EvaluateArgs),
    /// Aggregates a results CSV into robustness profiles and summaries.
    Aggregate(AggregateArgs),
    /// Fits the linear score ensemble on plan-generated samples.
    EnsembleTrain(EnsembleTrainArgs),
    /// Applies a trained linear ensemble and scores it like any method.
    EnsembleApply(EnsembleApplyArgs),
    /// Renders the rank table and per-level degradation charts.
    Report(ReportArgs),
    /// Dumps the violation schedule registry as CSV.
    RegistryDump(RegistryDumpArgs),
}

/// Baseline grid shape shared by evaluate and the ensemble commands.
#[derive(Args)]
struct GridArgs {
    /// Lag offsets applied to the regime's true depth, comma-separated.
    #[arg(long, default_value = "-2,0,2", value_name = "OFFSETS")]
    lag_offsets: String,
    /// Drops cross-correlation from the grid.
    #[arg(long)]
    no_cross_corr: bool,
    /// GVAR score modes, comma-separated from {coef, pval}; "none" disables.
    #[arg(long, default_value = "coef,pval", value_name = "MODES")]
    gvar_modes: String,
}

impl GridArgs {
    fn resolve(&self) -> Result<tcda_core::harness::BaselineGrid> {
        let grid = tcda_core::harness::BaselineGrid {
            lag_offsets: cmd::parse_offsets(&self.lag_offsets)?,
            cross_corr: !self.no_cross_corr,
            gvar_modes: cmd::parse_modes(&self.gvar_modes)?,
        };
        if grid.member_count() == 0 {
            bail!("the baseline grid is empty: no lag offsets or no methods");
        }
        Ok(grid)
    }
}

#[derive(Args)]
struct GenArgs {
    /// Output root; batches land in <out>/<violation>/L<level>/<regime>/.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Results CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Keep only these graphs in the output, comma-separated (lwcg,inst,lsg).
    #[arg(long, value_name = "GRAPHS")]
    graphs: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    /// Root of external prediction tensors; switches to external mode.
    #[arg(long, value_name = "DIR", requires = "data", requires_all = ["method", "hp"])]
    external: Option<PathBuf>,
    /// Root of generated batches to score external predictions against.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Method name recorded for external prediction rows.
    #[arg(long)]
    method: Option<String>,
    /// Hyperparameter id recorded for external prediction rows.
    #[arg(long)]
    hp: Option<String>,
    /// External predictions carry an instantaneous slab at lag slot 0.
    #[arg(long)]
    inst: bool,
    /// Lag depth of external predictions (default: each regime's depth).
    #[arg(long, value_name = "L")]
    l_model: Option<usize>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Results CSV produced by `evaluate`.
    #[arg(long, value_name = "FILE")]
    results: PathBuf,
    /// Directory for profiles.csv, best_hp.csv and worst_case.csv.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleTrainArgs {
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Ridge penalty on member weights (bias stays unpenalized).
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct EnsembleApplyArgs {
    /// Model file written by `ensemble-train`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Results CSV to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Keep only these graphs in the output, comma-separated (lwcg,inst,lsg).
    #[arg(long, value_name = "GRAPHS")]
    graphs: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by `evaluate`.
    #[arg(long, value_name = "FILE")]
    results: PathBuf,
    /// Directory for rank.csv and curves_*.svg.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Chart only these graphs, comma-separated (lwcg,inst,lsg).
    #[arg(long, value_name = "GRAPHS")]
    graphs: Option<String>,
    /// Chart only these metrics, comma-separated.
    #[arg(long, value_name = "METRICS")]
    metrics: Option<String>,
}

#[derive(Args)]
struct RegistryDumpArgs {
    /// CSV to write; prints to stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn plan_from(global: &Global) -> Result<Plan> {
    let Some(path) = &global.config else {
        bail!("--config PLAN.json is required for this command");
    };
    let mut plan =
        config::load_plan(path).with_context(|| format!("loading plan {}", path.display()))?;
    if let Some(seed) = global.seed {
        plan.seed = seed;
    }
    if let Some(variant) = &global.schedule_variant {
        plan.schedule_variant = ScheduleVariant::parse(variant)?;
    }
    Ok(plan)
}

fn variant_from(global: &Global) -> Result<ScheduleVariant> {
    match &global.schedule_variant {
        Some(s) => Ok(ScheduleVariant::parse(s)?),
        None => Ok(ScheduleVariant::Default),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Gen(args) => cmd::gen(&plan_from(&cli.global)?, &args.out),
        Command::Evaluate(args) => {
            let keep = args.graphs.as_deref().map(cmd::parse_graph_set).transpose()?;
            match &args.external {
                Some(pred_root) => {
                    let external = cmd::ExternalArgs {
                        pred_root,
                        data_root: args.data.as_deref().expect("clap enforces --data"),
                        method: args.method.as_deref().expect("clap enforces --method"),
                        hp: args.hp.as_deref().expect("clap enforces --hp"),
                        inst: args.inst,
                        l_model: args.l_model,
                    };
                    cmd::evaluate_external(&external, keep.as_ref(), &args.out)
                }
                None => cmd::evaluate_native(
                    &plan_from(&cli.global)?,
                    &args.grid.resolve()?,
                    keep.as_ref(),
                    &args.out,
                ),
            }
        }
        Command::Aggregate(args) => cmd::aggregate(&args.results, &args.out),
        Command::EnsembleTrain(args) => cmd::ensemble_train(
            &plan_from(&cli.global)?,
            &args.grid.resolve()?,
            args.lambda,
            &args.out,
        ),
        Command::EnsembleApply(args) => {
            let keep = args.graphs.as_deref().map(cmd::parse_graph_set).transpose()?;
            cmd::ensemble_apply(
                &plan_from(&cli.global)?,
                &args.grid.resolve()?,
                &args.model,
                keep.as_ref(),
                &args.out,
            )
        }
        Command::Report(args) => {
            let graphs = args.graphs.as_deref().map(cmd::parse_graph_set).transpose()?;
            let metrics = args.metrics.as_deref().map(cmd::parse_metric_set).transpose()?;
            cmd::report(&args.results, &args.out, graphs.as_ref(), metrics.as_ref())
        }
        Command::RegistryDump(args) => {
            cmd::registry_dump(variant_from(&cli.global)?, args.out.as_deref())
        }
    }
}
