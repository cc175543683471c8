//! Shared command implementations: both the flag-driven subcommands and
//! manifest runs funnel through the builders here, so the two front ends
//! cannot drift apart.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use hpi::io::{self, OutputStage};
use hpi::rng::{stable_hash64, stream};
use hpi::{
    faithfulness, fsii, moebius_transform, multi_dataset_game, normalize_game, shapley_values,
    Aggregator, Atom, ConfigSpace, Configuration, Faithfulness, GameKind, GameSpec, GameValues,
    HyperparameterDomain, IndexKind, IndicatorSumOracle, InteractionValues, MissingPolicy,
    OptimizerSpec, PerformanceOracle, ProductIndicatorOracle, RandomKAdditiveOracle, SamplingPlan,
    SearchPlan,
};

/// Stream tag for generated oracles, disjoint from the library's internal
/// purpose tags.
const SALT_CLI_ORACLE: u64 = 6;

/// Where game caches land when `--out` is absent: `$HPI_CACHE_DIR`, or
/// `./hpi-cache` next to the working directory.
pub fn cache_dir() -> PathBuf {
    std::env::var_os("HPI_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("hpi-cache"))
}

/// Runs `f` on a dedicated thread pool when a parallelism degree was
/// requested; otherwise the default global pool serves.
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building the worker pool")?
            .install(f),
    }
}

/// Where a performance oracle comes from. Serializable so manifests can
/// carry it and cache fingerprints can include it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSource {
    /// Synthetic: one point per coordinate matching the optimum.
    IndicatorSum {
        #[serde(default)]
        optimum: Option<Configuration>,
    },
    /// Synthetic: full score only when every coordinate matches.
    ProductIndicator {
        #[serde(default)]
        optimum: Option<Configuration>,
    },
    /// Random game over binary switches with interactions up to order `k`.
    KAdditive {
        k: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Recorded evaluations from a CSV or JSON table.
    Tabular {
        path: PathBuf,
        /// Score substituted for unrecorded configurations; errors when
        /// absent.
        #[serde(default)]
        missing: Option<f64>,
        /// Dataset label; defaults to the file stem.
        #[serde(default)]
        label: Option<String>,
    },
}

/// Parses the `--oracle` flag: a builtin name, `k-additive:K`, or a path
/// to recorded evaluations.
pub fn parse_oracle_flag(s: &str) -> Result<OracleSource> {
    match s {
        "indicator-sum" => return Ok(OracleSource::IndicatorSum { optimum: None }),
        "product-indicator" => return Ok(OracleSource::ProductIndicator { optimum: None }),
        _ => {}
    }
    if let Some(k) = s.strip_prefix("k-additive:") {
        let k = k
            .parse()
            .map_err(|_| anyhow!("`{s}`: the order after k-additive: must be an integer"))?;
        return Ok(OracleSource::KAdditive { k, seed: None });
    }
    if s.ends_with(".csv") || s.ends_with(".json") {
        return Ok(OracleSource::Tabular {
            path: PathBuf::from(s),
            missing: None,
            label: None,
        });
    }
    bail!(
        "unknown oracle `{s}`: expected indicator-sum, product-indicator, \
         k-additive:K, or a path ending in .csv or .json"
    )
}

/// The top end of every domain: the last listed value for discrete
/// players, the upper bound for continuous ones. Default optimum for the
/// synthetic indicator oracles.
fn domain_top(space: &ConfigSpace) -> Configuration {
    space
        .players()
        .iter()
        .map(|p| match &p.domain {
            HyperparameterDomain::Discrete { values } => {
                values.last().expect("domains are never empty").clone()
            }
            HyperparameterDomain::Continuous { upper, .. } => Atom::Real(*upper),
        })
        .collect()
}

/// Instantiates the oracle. Relative tabular paths resolve against
/// `base_dir` (the manifest's directory, or the working directory for
/// direct flag use); `seed` feeds generated oracles that do not pin their
/// own.
pub fn build_oracle(
    source: &OracleSource,
    space: &ConfigSpace,
    seed: u64,
    base_dir: &Path,
) -> Result<Box<dyn PerformanceOracle>> {
    Ok(match source {
        OracleSource::IndicatorSum { optimum } => {
            let optimum = optimum.clone().unwrap_or_else(|| domain_top(space));
            Box::new(IndicatorSumOracle::new(space.clone(), optimum)?)
        }
        OracleSource::ProductIndicator { optimum } => {
            let optimum = optimum.clone().unwrap_or_else(|| domain_top(space));
            Box::new(ProductIndicatorOracle::new(space.clone(), optimum)?)
        }
        OracleSource::KAdditive { k, seed: own } => {
            let mut rng = stream(own.unwrap_or(seed), &[SALT_CLI_ORACLE]);
            Box::new(RandomKAdditiveOracle::new(space.clone(), *k, &mut rng)?)
        }
        OracleSource::Tabular {
            path,
            missing,
            label,
        } => {
            let path = resolve(base_dir, path);
            let policy = match missing {
                None => MissingPolicy::Error,
                Some(v) => MissingPolicy::DefaultValue(*v),
            };
            let label = label.clone().or_else(|| {
                path.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
            });
            Box::new(io::tabular_oracle_from_file(&path, space.clone(), policy, label)?)
        }
    })
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// A game request as it arrives from flags or a manifest: everything
/// needed to build a [`GameKind`] once the seed is known.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameRequest {
    /// ablation | marginal-ablation | sensitivity | tunability |
    /// worst-case | optimizer-bias
    pub kind: String,
    /// exact | mc:SAMPLES | rs:BUDGET (for games with a plan)
    #[serde(default)]
    pub mode: Option<String>,
    /// Target configuration for the ablation games.
    #[serde(default)]
    pub target: Option<Configuration>,
    /// Tested optimizer for optimizer-bias games.
    #[serde(default)]
    pub optimizer: Option<OptimizerSpec>,
    /// Reference for optimizer-bias games: exact | rs:BUDGET.
    #[serde(default)]
    pub reference: Option<String>,
    /// Shift the finished table so the empty coalition sits at zero.
    #[serde(default)]
    pub normalize: bool,
}

fn parse_sampling(mode: Option<&str>, seed: u64) -> Result<SamplingPlan> {
    match mode.unwrap_or("exact") {
        "exact" => Ok(SamplingPlan::ExactEnumeration),
        m => {
            let samples = m
                .strip_prefix("mc:")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| anyhow!("`{m}`: expected exact or mc:SAMPLES"))?;
            Ok(SamplingPlan::MonteCarlo { samples, seed })
        }
    }
}

fn parse_search(mode: Option<&str>, seed: u64) -> Result<SearchPlan> {
    match mode.unwrap_or("exact") {
        "exact" => Ok(SearchPlan::ExactEnumeration),
        m => {
            let budget = m
                .strip_prefix("rs:")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| anyhow!("`{m}`: expected exact or rs:BUDGET"))?;
            Ok(SearchPlan::RandomSearch { budget, seed })
        }
    }
}

fn reject_mode(request: &GameRequest) -> Result<()> {
    match request.mode.as_deref() {
        None | Some("exact") => Ok(()),
        Some(m) => bail!("the {} game takes no --mode (got `{m}`)", request.kind),
    }
}

/// Turns a request into a validated [`GameKind`]; `seed` feeds any sampled
/// plan in the request.
pub fn build_game_kind(request: &GameRequest, seed: u64) -> Result<GameKind> {
    let target = || {
        request
            .target
            .clone()
            .ok_or_else(|| anyhow!("the {} game needs --target", request.kind))
    };
    let kind = match request.kind.as_str() {
        "ablation" => {
            reject_mode(request)?;
            GameKind::Ablation { target: target()? }
        }
        "marginal-ablation" => GameKind::MarginalAblation {
            target: target()?,
            plan: parse_sampling(request.mode.as_deref(), seed)?,
        },
        "sensitivity" => GameKind::Sensitivity {
            plan: parse_sampling(request.mode.as_deref(), seed)?,
        },
        "tunability" => GameKind::Tunability {
            plan: parse_search(request.mode.as_deref(), seed)?,
        },
        "worst-case" => GameKind::WorstCase {
            plan: parse_search(request.mode.as_deref(), seed)?,
        },
        "optimizer-bias" => {
            reject_mode(request)?;
            let optimizer = request
                .optimizer
                .clone()
                .ok_or_else(|| anyhow!("the optimizer-bias game needs --optimizer"))?;
            GameKind::OptimizerBias {
                optimizer,
                reference: parse_search(request.reference.as_deref(), seed)?,
            }
        }
        other => bail!(
            "unknown game `{other}`: expected ablation, marginal-ablation, \
             sensitivity, tunability, worst-case, or optimizer-bias"
        ),
    };
    if !matches!(kind, GameKind::OptimizerBias { .. }) && request.reference.is_some() {
        bail!("--reference only applies to the optimizer-bias game");
    }
    if !matches!(
        kind,
        GameKind::Ablation { .. } | GameKind::MarginalAblation { .. }
    ) && request.target.is_some()
    {
        bail!("--target only applies to the ablation games");
    }
    Ok(kind)
}

#[derive(Serialize)]
struct Fingerprint<'a> {
    space: &'a ConfigSpace,
    oracle: &'a OracleSource,
    game: &'a GameRequest,
    baseline: &'a Configuration,
    seed: u64,
}

fn short_hash(bytes: &[u8]) -> String {
    format!("{:08x}", stable_hash64(bytes) & 0xFFFF_FFFF)
}

/// Everything `game` and `optimizer-bias` need, already parsed.
pub struct GameArgs {
    pub space: PathBuf,
    pub oracle: OracleSource,
    pub request: GameRequest,
    pub baseline: Option<Configuration>,
}

fn print_summary(game: &GameValues, elapsed: Duration) {
    println!("v(empty) = {}", game.empty_value());
    println!("v(grand) = {}", game.grand_value());
    println!("elapsed: {:.3}s", elapsed.as_secs_f64());
}

/// Evaluates (or reuses) a game table and returns the cache path.
pub fn cmd_game(
    args: &GameArgs,
    seed: u64,
    force: bool,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let start = Instant::now();
    let space = io::read_config_space(&args.space)?;
    let baseline = args
        .baseline
        .clone()
        .unwrap_or_else(|| space.default_configuration().clone());
    let kind = build_game_kind(&args.request, seed)?;
    let oracle = build_oracle(&args.oracle, &space, seed, Path::new(""))?;
    let spec = GameSpec::new(space.clone(), baseline.clone(), kind)?;

    let dest = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let fp = serde_json::to_vec(&Fingerprint {
                space: &space,
                oracle: &args.oracle,
                game: &args.request,
                baseline: &baseline,
                seed,
            })?;
            cache_dir().join(format!("{}-{}.json", spec.kind().name(), short_hash(&fp)))
        }
    };

    if !force && dest.exists() {
        let expected = GameValues::from_parts(
            spec.kind().name(),
            baseline.clone(),
            spec.kind().primary_seed(),
            args.request.normalize,
            oracle.label().map(str::to_owned),
            space.names().map(str::to_owned).collect(),
            vec![0.0; 1 << space.n()],
        )?;
        match io::read_game(&dest) {
            Ok(cached) if cached.meta_matches(&expected) => {
                println!("cache hit: {}", dest.display());
                print_summary(&cached, start.elapsed());
                return Ok(dest);
            }
            _ => println!("cache mismatch, recomputing: {}", dest.display()),
        }
    }

    let mut game = spec.evaluate(oracle.as_ref())?;
    if args.request.normalize {
        game = normalize_game(&game);
    }
    io::write_game(&dest, &game)?;
    println!("wrote {}", dest.display());
    print_summary(&game, start.elapsed());
    Ok(dest)
}

/// Computes the requested index with its default order when none is given
/// (full order for the Möbius transform, 1 for Shapley values, 2 for the
/// least-squares interactions). Returns the scores and a file stem.
pub fn compute_index(
    game: &GameValues,
    kind: &str,
    order: Option<usize>,
) -> Result<(InteractionValues, String)> {
    let parsed = IndexKind::parse(kind)
        .ok_or_else(|| anyhow!("unknown index `{kind}`: expected moebius, sv, or fsii"))?;
    match parsed {
        IndexKind::Moebius => {
            if let Some(k) = order {
                if k != game.n() {
                    bail!("the moebius index always carries every order (n = {})", game.n());
                }
            }
            Ok((moebius_transform(game), "moebius".to_owned()))
        }
        IndexKind::ShapleyValue => {
            if let Some(k) = order {
                if k != 1 {
                    bail!("sv is an order-1 index");
                }
            }
            Ok((shapley_values(game), "sv".to_owned()))
        }
        IndexKind::Fsii => {
            let k = order.unwrap_or_else(|| 2.min(game.n()));
            Ok((fsii(game, k)?, format!("fsii-{k}")))
        }
    }
}

/// Computes an index from a cached game and writes the score file plus any
/// requested graph or membership exports, all-or-nothing.
#[allow(clippy::too_many_arguments)]
pub fn cmd_explain(
    game_path: &Path,
    index: &str,
    order: Option<usize>,
    dot: Option<&Path>,
    upset_csv: Option<&Path>,
    threshold: f64,
    out: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let game = io::read_game(game_path)?;
    let (iv, stem) = compute_index(&game, index, order)?;
    let out = match out {
        Some(p) => p.to_path_buf(),
        None => sibling(game_path, &format!("-{stem}.json")),
    };
    let mut stage = OutputStage::new();
    let mut written = vec![out.clone()];
    stage.stage(&out, &io::render_interactions(&iv))?;
    if let Some(dot) = dot {
        stage.stage(dot, &io::render_dot(&iv, threshold))?;
        written.push(dot.to_path_buf());
    }
    if let Some(csv) = upset_csv {
        stage.stage(csv, &io::render_upset_csv(&iv))?;
        written.push(csv.to_path_buf());
    }
    stage.commit()?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(written)
}

/// `game.json` → `game{suffix}` in the same directory.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "game".to_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Fits every order up to `max_order` and reports the residual curve.
pub fn cmd_faithfulness(
    game_path: &Path,
    max_order: Option<usize>,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let game = io::read_game(game_path)?;
    let rows = faithfulness_rows(&game, max_order)?;
    let out = match out {
        Some(p) => p.to_path_buf(),
        None => sibling(game_path, "-faithfulness.csv"),
    };
    io::write_faithfulness_csv(&out, &rows)?;
    for (k, f) in &rows {
        println!("k={k} residual={} r_squared={}", f.residual, f.r_squared);
    }
    println!("wrote {}", out.display());
    Ok(out)
}

pub fn faithfulness_rows(
    game: &GameValues,
    max_order: Option<usize>,
) -> Result<Vec<(usize, Faithfulness)>> {
    let k_max = max_order.unwrap_or_else(|| game.n());
    if k_max == 0 || k_max > game.n() {
        bail!("--max-order must be between 1 and {}", game.n());
    }
    (1..=k_max)
        .map(|k| {
            let iv = fsii(game, k)?;
            Ok((k, faithfulness(game, &iv)?))
        })
        .collect()
}

pub fn parse_aggregator(s: &str) -> Result<Aggregator> {
    if s == "mean" {
        return Ok(Aggregator::Mean);
    }
    if let Some(q) = s.strip_prefix("quantile:") {
        let q: f64 = q
            .parse()
            .map_err(|_| anyhow!("`{s}`: the value after quantile: must be a number"))?;
        return Ok(Aggregator::Quantile(q));
    }
    bail!("unknown aggregator `{s}`: expected mean or quantile:Q")
}

/// Aggregates per-dataset caches coordinate-wise into one cache.
pub fn cmd_multi(games: &[PathBuf], aggregate: &str, out: Option<&Path>) -> Result<PathBuf> {
    let start = Instant::now();
    let aggregator = parse_aggregator(aggregate)?;
    let mut tables = Vec::with_capacity(games.len());
    let mut digest = aggregate.as_bytes().to_vec();
    for path in games {
        let bytes =
            std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        digest.extend_from_slice(&bytes);
        tables.push(io::read_game(path)?);
    }
    let merged = multi_dataset_game(&tables, aggregator)?;
    let dest = match out {
        Some(p) => p.to_path_buf(),
        None => cache_dir().join(format!("multi-{}.json", short_hash(&digest))),
    };
    io::write_game(&dest, &merged)?;
    println!(
        "wrote {} ({} datasets, {})",
        dest.display(),
        tables.len(),
        aggregator.label()
    );
    print_summary(&merged, start.elapsed());
    Ok(dest)
}
