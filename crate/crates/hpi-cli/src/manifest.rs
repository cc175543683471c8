//! Manifest-driven runs: one JSON file describing space, oracle, game and
//! every requested artifact, executed as a single all-or-nothing batch.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use hpi::io::{self, OutputStage};
use hpi::{normalize_game, GameSpec};

use crate::commands::{
    build_game_kind, build_oracle, compute_index, faithfulness_rows, resolve, with_pool,
    GameRequest, OracleSource,
};

/// A complete run: evaluate one game, then derive any number of index and
/// diagnostic files from it. Relative paths resolve against the manifest's
/// own directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub space: PathBuf,
    pub oracle: OracleSource,
    #[serde(default)]
    pub baseline: Option<hpi::Configuration>,
    pub game: GameRequest,
    /// Interaction indices to compute from the finished game.
    #[serde(default)]
    pub indices: Vec<IndexRequest>,
    /// When set, also fit every order up to this one and write the
    /// residual curve as faithfulness.csv.
    #[serde(default)]
    pub faithfulness_max_order: Option<usize>,
    pub out_dir: PathBuf,
    /// Seed used when the command line does not pass one.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Parallelism degree used when the command line does not pass one.
    #[serde(default)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexRequest {
    /// moebius | sv | fsii
    pub kind: String,
    #[serde(default)]
    pub order: Option<usize>,
    /// Also write a Graphviz rendering.
    #[serde(default)]
    pub dot: bool,
    /// Also write membership rows for UpSet-style plots.
    #[serde(default)]
    pub upset_csv: bool,
    /// Magnitude cutoff applied to the Graphviz rendering only.
    #[serde(default)]
    pub threshold: f64,
}

/// Executes a manifest. `seed` and `jobs` from the command line win over
/// the manifest's own entries; `out_dir` overrides the output directory.
pub fn cmd_run(
    manifest_path: &Path,
    seed: Option<u64>,
    jobs: Option<usize>,
    out_dir: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let bytes = std::fs::read(manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: RunManifest = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing {}", manifest_path.display()))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));
    let seed = seed.or(manifest.seed).unwrap_or(0);
    let jobs = jobs.or(manifest.jobs);
    let out_dir = match out_dir {
        Some(p) => p.to_path_buf(),
        None => resolve(base, &manifest.out_dir),
    };

    with_pool(jobs, || {
        let space = io::read_config_space(resolve(base, &manifest.space))?;
        let baseline = manifest
            .baseline
            .clone()
            .unwrap_or_else(|| space.default_configuration().clone());
        let kind = build_game_kind(&manifest.game, seed)?;
        let oracle = build_oracle(&manifest.oracle, &space, seed, base)?;
        let spec = GameSpec::new(space, baseline, kind)?;

        let mut game = spec.evaluate(oracle.as_ref())?;
        if manifest.game.normalize {
            game = normalize_game(&game);
        }

        let mut stage = OutputStage::new();
        let mut written = Vec::new();
        let mut put = |stage: &mut OutputStage, name: String, bytes: &[u8]| -> Result<()> {
            let path = out_dir.join(name);
            stage.stage(&path, bytes)?;
            written.push(path);
            Ok(())
        };

        put(&mut stage, "game.json".to_owned(), &io::render_game(&game))?;
        for request in &manifest.indices {
            let (iv, stem) = compute_index(&game, &request.kind, request.order)?;
            put(&mut stage, format!("{stem}.json"), &io::render_interactions(&iv))?;
            if request.dot {
                put(
                    &mut stage,
                    format!("{stem}.dot"),
                    &io::render_dot(&iv, request.threshold),
                )?;
            }
            if request.upset_csv {
                put(&mut stage, format!("{stem}.csv"), &io::render_upset_csv(&iv))?;
            }
        }
        if manifest.faithfulness_max_order.is_some() {
            let rows = faithfulness_rows(&game, manifest.faithfulness_max_order)?;
            put(
                &mut stage,
                "faithfulness.csv".to_owned(),
                &io::render_faithfulness_csv(&rows),
            )?;
        }
        stage.commit()?;
        for path in &written {
            println!("wrote {}", path.display());
        }
        Ok(written)
    })
}
