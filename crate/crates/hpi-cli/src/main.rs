//! `hpi`: evaluate hyperparameter-importance games and explain them.

mod commands;
mod manifest;

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{cmd_explain, cmd_faithfulness, cmd_game, cmd_multi, with_pool, GameArgs};

#[derive(Parser)]
#[command(
    name = "hpi",
    version,
    about = "Explain hyperparameter importance with cooperative games",
    after_help = "Game caches default to $HPI_CACHE_DIR (falling back to ./hpi-cache)."
)]
struct Cli {
    /// Seed for sampled plans and generated oracles (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for game evaluation (default: all cores). Results
    /// are bit-identical either way.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Recompute a game even when a matching cache file exists.
    #[arg(long, global = true)]
    force: bool,

    /// Output path: a file for game/explain/faithfulness/multi, a
    /// directory for run.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a game table over every coalition and cache it.
    Game(GameCmd),
    /// Compute an interaction index from a cached game table.
    Explain(ExplainCmd),
    /// Fit every explanation order and report the residual curve.
    Faithfulness(FaithfulnessCmd),
    /// Aggregate per-dataset game caches coordinate-wise.
    Multi(MultiCmd),
    /// Shorthand for `game --game optimizer-bias`.
    OptimizerBias(OptimizerBiasCmd),
    /// Execute a manifest: one game plus all its derived artifacts.
    Run(RunCmd),
}

#[derive(Args)]
struct GameCmd {
    /// Configuration-space JSON file.
    #[arg(long)]
    space: PathBuf,

    /// indicator-sum | product-indicator | k-additive:K | path to
    /// recorded evaluations (.csv or .json).
    #[arg(long)]
    oracle: String,

    /// ablation | marginal-ablation | sensitivity | tunability |
    /// worst-case | optimizer-bias
    #[arg(long = "game", value_name = "KIND")]
    kind: String,

    /// exact | mc:SAMPLES | rs:BUDGET
    #[arg(long)]
    mode: Option<String>,

    /// Baseline configuration as a JSON array (default: the space's
    /// default configuration).
    #[arg(long)]
    baseline: Option<String>,

    /// Target configuration for the ablation games, as a JSON array.
    #[arg(long)]
    target: Option<String>,

    /// Optimum for the indicator oracles, as a JSON array (default: the
    /// top of every domain).
    #[arg(long)]
    optimum: Option<String>,

    /// Score substituted for configurations missing from a tabular
    /// oracle; errors without it.
    #[arg(long)]
    missing: Option<f64>,

    /// Tested optimizer for optimizer-bias, as JSON or @file.
    #[arg(long)]
    optimizer: Option<String>,

    /// Reference for optimizer-bias: exact | rs:BUDGET.
    #[arg(long)]
    reference: Option<String>,

    /// Shift the finished table so the empty coalition sits at zero.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct OptimizerBiasCmd {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    oracle: String,
    /// Tested optimizer, as JSON or @file.
    #[arg(long)]
    optimizer: String,
    /// exact | rs:BUDGET
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    optimum: Option<String>,
    #[arg(long)]
    missing: Option<f64>,
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct ExplainCmd {
    /// Cached game table from `hpi game`.
    #[arg(long)]
    game: PathBuf,

    /// moebius | sv | fsii
    #[arg(long)]
    index: String,

    /// Explanation order (fsii only; defaults: full for moebius, 1 for
    /// sv, 2 for fsii).
    #[arg(long)]
    order: Option<usize>,

    /// Also write a Graphviz rendering to this path.
    #[arg(long)]
    dot: Option<PathBuf>,

    /// Also write membership rows for UpSet-style plots to this path.
    #[arg(long = "upset-csv")]
    upset_csv: Option<PathBuf>,

    /// Drop |score| below this cutoff from the Graphviz rendering only.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
}

#[derive(Args)]
struct FaithfulnessCmd {
    /// Cached game table from `hpi game`.
    #[arg(long)]
    game: PathBuf,

    /// Largest explanation order to fit (default: the player count).
    #[arg(long = "max-order")]
    max_order: Option<usize>,
}

#[derive(Args)]
struct MultiCmd {
    /// Per-dataset game caches to aggregate.
    #[arg(long = "games", num_args = 1.., required = true)]
    games: Vec<PathBuf>,

    /// mean | quantile:Q
    #[arg(long, default_value = "mean")]
    aggregate: String,
}

#[derive(Args)]
struct RunCmd {
    /// Manifest JSON describing the whole run.
    #[arg(long)]
    manifest: PathBuf,
}

fn parse_config(label: &str, s: Option<&str>) -> Result<Option<hpi::Configuration>> {
    s.map(|text| {
        serde_json::from_str(text)
            .with_context(|| format!("--{label} must be a JSON array of scalars, got `{text}`"))
    })
    .transpose()
}

fn parse_optimizer(s: &str) -> Result<hpi::OptimizerSpec> {
    let text = match s.strip_prefix('@') {
        Some(path) => {
            std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?
        }
        None => s.to_owned(),
    };
    serde_json::from_str(&text).map_err(|e| anyhow!("--optimizer: {e}"))
}

fn game_args(cmd: &GameCmd) -> Result<GameArgs> {
    let mut oracle = commands::parse_oracle_flag(&cmd.oracle)?;
    match &mut oracle {
        commands::OracleSource::IndicatorSum { optimum }
        | commands::OracleSource::ProductIndicator { optimum } => {
            *optimum = parse_config("optimum", cmd.optimum.as_deref())?;
        }
        commands::OracleSource::Tabular { missing, .. } => {
            *missing = cmd.missing;
        }
        commands::OracleSource::KAdditive { .. } => {}
    }
    let request = commands::GameRequest {
        kind: cmd.kind.clone(),
        mode: cmd.mode.clone(),
        target: parse_config("target", cmd.target.as_deref())?,
        optimizer: cmd.optimizer.as_deref().map(parse_optimizer).transpose()?,
        reference: cmd.reference.clone(),
        normalize: cmd.normalize,
    };
    Ok(GameArgs {
        space: cmd.space.clone(),
        oracle,
        request,
        baseline: parse_config("baseline", cmd.baseline.as_deref())?,
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Game(cmd) => {
            let args = game_args(cmd)?;
            with_pool(cli.jobs, || cmd_game(&args, seed, cli.force, out))?;
        }
        Command::OptimizerBias(cmd) => {
            let args = game_args(&GameCmd {
                space: cmd.space.clone(),
                oracle: cmd.oracle.clone(),
                kind: "optimizer-bias".to_owned(),
                mode: None,
                baseline: cmd.baseline.clone(),
                target: None,
                optimum: cmd.optimum.clone(),
                missing: cmd.missing,
                optimizer: Some(cmd.optimizer.clone()),
                reference: cmd.reference.clone(),
                normalize: cmd.normalize,
            })?;
            with_pool(cli.jobs, || cmd_game(&args, seed, cli.force, out))?;
        }
        Command::Explain(cmd) => {
            cmd_explain(
                &cmd.game,
                &cmd.index,
                cmd.order,
                cmd.dot.as_deref(),
                cmd.upset_csv.as_deref(),
                cmd.threshold,
                out,
            )?;
        }
        Command::Faithfulness(cmd) => {
            cmd_faithfulness(&cmd.game, cmd.max_order, out)?;
        }
        Command::Multi(cmd) => {
            cmd_multi(&cmd.games, &cmd.aggregate, out)?;
        }
        Command::Run(cmd) => {
            manifest::cmd_run(&cmd.manifest, cli.seed, cli.jobs, out)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
