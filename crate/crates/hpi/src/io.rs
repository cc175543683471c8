//! File formats and atomic output staging.
//!
//! Readers validate everything and name the offending entity in errors.
//! Writers are atomic (temp file in the target directory, then rename);
//! multi-file outputs go through [`OutputStage`] so either every file
//! appears or none does. Floats are written in shortest round-trip form, so
//! re-reading an emitted file reproduces the values bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::game::GameValues;
use crate::index::{Faithfulness, IndexKind, InteractionValues};
use crate::oracle::{MissingPolicy, TabularOracle};
use crate::space::{ConfigSpace, Configuration};

/// Loads a configuration space from its JSON description
/// (`{"players": [{"name", "domain"}], "default": [...]}`).
pub fn read_config_space(path: impl AsRef<Path>) -> Result<ConfigSpace, Error> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabularFileRepr {
    rows: Vec<TabularRowRepr>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabularRowRepr {
    config: Configuration,
    value: f64,
}

/// Loads recorded evaluations as a tabular oracle.
///
/// `.json` files carry `{"rows": [{"config": [...], "value": 0.93}]}`.
/// `.csv` files carry a header naming every player in space order plus a
/// final `performance` column; every cell is a JSON scalar (strings quoted).
pub fn tabular_oracle_from_file(
    path: impl AsRef<Path>,
    space: ConfigSpace,
    missing: MissingPolicy,
    label: Option<String>,
) -> Result<TabularOracle, Error> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let rows = match ext {
        "json" => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            let repr: TabularFileRepr =
                serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
            repr.rows.into_iter().map(|r| (r.config, r.value)).collect()
        }
        "csv" => read_tabular_csv(path, &space)?,
        other => {
            return Err(Error::format(
                path,
                format!("unsupported tabular extension `{other}` (expected csv or json)"),
            ))
        }
    };
    TabularOracle::from_rows(space, rows, missing, label)
}

fn read_tabular_csv(path: &Path, space: &ConfigSpace) -> Result<Vec<(Configuration, f64)>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    let expected: Vec<&str> = space.names().chain(["performance"]).collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::format(
            path,
            format!("header mismatch: expected {expected:?}, got {got:?}"),
        ));
    }
    let n = space.n();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != n + 1 {
            return Err(Error::format(
                path,
                format!("row {}: expected {} fields, got {}", i + 1, n + 1, record.len()),
            ));
        }
        let mut atoms = Vec::with_capacity(n);
        for (j, cell) in record.iter().take(n).enumerate() {
            let atom = serde_json::from_str(cell).map_err(|_| {
                Error::format(
                    path,
                    format!(
                        "row {}, column `{}`: `{cell}` is not a JSON scalar",
                        i + 1,
                        expected[j]
                    ),
                )
            })?;
            atoms.push(atom);
        }
        let value: f64 = serde_json::from_str(&record[n]).map_err(|_| {
            Error::format(
                path,
                format!("row {}: performance `{}` is not a number", i + 1, &record[n]),
            )
        })?;
        rows.push((Configuration::new(atoms), value));
    }
    Ok(rows)
}

/// Serializes a game table to the cache JSON format.
pub fn render_game(game: &GameValues) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(game).expect("game tables always serialize");
    bytes.push(b'\n');
    bytes
}

/// Writes a game table atomically.
pub fn write_game(path: impl AsRef<Path>, game: &GameValues) -> Result<(), Error> {
    write_atomic(path.as_ref(), &render_game(game))
}

/// Reads a cached game table, validating shape and finiteness.
pub fn read_game(path: impl AsRef<Path>) -> Result<GameValues, Error> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InteractionsRepr {
    index: String,
    order: usize,
    baseline_value: f64,
    player_names: Vec<String>,
    scores: Vec<ScoreRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRepr {
    coalition: Vec<String>,
    value: f64,
}

/// Coalitions ordered for human consumption: largest magnitude first, ties
/// by ascending size then mask.
fn ranked_scores(iv: &InteractionValues) -> Vec<(crate::coalition::Coalition, f64)> {
    let mut entries: Vec<_> = iv.iter().collect();
    entries.sort_by(|(ca, va), (cb, vb)| {
        vb.abs()
            .total_cmp(&va.abs())
            .then(ca.len().cmp(&cb.len()))
            .then(ca.mask().cmp(&cb.mask()))
    });
    entries
}

/// Serializes interaction scores with coalitions spelled as player names,
/// ranked by magnitude.
pub fn render_interactions(iv: &InteractionValues) -> Vec<u8> {
    let names = iv.player_names();
    let scores = ranked_scores(iv)
        .into_iter()
        .map(|(c, value)| ScoreRepr {
            coalition: c.members().map(|i| names[i].clone()).collect(),
            value,
        })
        .collect();
    let repr = InteractionsRepr {
        index: iv.kind().as_str().to_owned(),
        order: iv.order(),
        baseline_value: iv.baseline_value(),
        player_names: names.to_vec(),
        scores,
    };
    let mut bytes = serde_json::to_vec_pretty(&repr).expect("score reprs always serialize");
    bytes.push(b'\n');
    bytes
}

pub fn write_interactions(path: impl AsRef<Path>, iv: &InteractionValues) -> Result<(), Error> {
    write_atomic(path.as_ref(), &render_interactions(iv))
}

/// Reads an interaction score file back into [`InteractionValues`].
pub fn read_interactions(path: impl AsRef<Path>) -> Result<InteractionValues, Error> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let repr: InteractionsRepr =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    let kind = IndexKind::parse(&repr.index)
        .ok_or_else(|| Error::format(path, format!("unknown index kind `{}`", repr.index)))?;
    let index_of = |name: &str| -> Result<usize, Error> {
        repr.player_names
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::format(path, format!("unknown player `{name}` in a coalition")))
    };
    let mut scores = std::collections::BTreeMap::new();
    for s in &repr.scores {
        if !s.value.is_finite() {
            return Err(Error::format(
                path,
                format!("non-finite score for coalition {:?}", s.coalition),
            ));
        }
        let mut mask = 0u32;
        for name in &s.coalition {
            let bit = 1u32 << index_of(name)?;
            if mask & bit != 0 {
                return Err(Error::format(
                    path,
                    format!("player `{name}` repeats inside one coalition"),
                ));
            }
            mask |= bit;
        }
        if scores.insert(mask, s.value).is_some() {
            return Err(Error::format(
                path,
                format!("coalition {:?} appears twice", s.coalition),
            ));
        }
    }
    InteractionValues::from_raw(
        kind,
        repr.order,
        repr.baseline_value,
        repr.player_names,
        scores,
    )
}

/// Serializes a faithfulness curve as CSV (`k,residual,r_squared`).
pub fn render_faithfulness_csv(rows: &[(usize, Faithfulness)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "residual", "r_squared"])
        .expect("in-memory csv");
    for (k, f) in rows {
        w.write_record([
            k.to_string(),
            f.residual.to_string(),
            f.r_squared.to_string(),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn write_faithfulness_csv(
    path: impl AsRef<Path>,
    rows: &[(usize, Faithfulness)],
) -> Result<(), Error> {
    write_atomic(path.as_ref(), &render_faithfulness_csv(rows))
}

pub fn read_faithfulness_csv(
    path: impl AsRef<Path>,
) -> Result<Vec<(usize, Faithfulness)>, Error> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let headers: Vec<&str> = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .collect();
    if headers != ["k", "residual", "r_squared"] {
        return Err(Error::format(path, format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let parse_err = || Error::format(path, format!("row {}: malformed entry", i + 1));
        let k: usize = record.get(0).ok_or_else(parse_err)?.parse().map_err(|_| parse_err())?;
        let residual: f64 = record.get(1).ok_or_else(parse_err)?.parse().map_err(|_| parse_err())?;
        let r_squared: f64 = record.get(2).ok_or_else(parse_err)?.parse().map_err(|_| parse_err())?;
        rows.push((
            k,
            Faithfulness {
                residual,
                r_squared,
            },
        ));
    }
    Ok(rows)
}

/// Serializes interaction scores as membership rows for UpSet-style plots:
/// each record lists the member names followed by the score, ranked by
/// magnitude.
pub fn render_upset_csv(iv: &InteractionValues) -> Vec<u8> {
    let names = iv.player_names();
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(Vec::new());
    for (c, value) in ranked_scores(iv) {
        let mut record: Vec<String> = c.members().map(|i| names[i].clone()).collect();
        record.push(value.to_string());
        w.write_record(&record).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn write_upset_csv(path: impl AsRef<Path>, iv: &InteractionValues) -> Result<(), Error> {
    write_atomic(path.as_ref(), &render_upset_csv(iv))
}

/// Reads membership rows back as `(member names, value)` pairs.
pub fn read_upset_csv(path: impl AsRef<Path>) -> Result<Vec<(Vec<String>, f64)>, Error> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.is_empty() {
            continue;
        }
        let value: f64 = record[record.len() - 1]
            .parse()
            .map_err(|_| Error::format(path, format!("row {}: last field is not a number", i + 1)))?;
        let members = record.iter().take(record.len() - 1).map(str::to_owned).collect();
        rows.push((members, value));
    }
    Ok(rows)
}

/// Renders interactions as a Graphviz graph.
///
/// Singleton scores annotate player nodes, pairs become edges, and
/// coalitions of three or more players are drawn as a star through a
/// labeled junction node. Positive scores are red, negative blue; line
/// width scales with magnitude. Coalitions with `|score| < threshold` are
/// omitted from the drawing (players always keep their nodes).
pub fn render_dot(iv: &InteractionValues, threshold: f64) -> Vec<u8> {
    let names = iv.player_names();
    let kept: Vec<(crate::coalition::Coalition, f64)> = {
        let mut entries: Vec<_> = iv
            .iter()
            .filter(|(_, v)| v.abs() >= threshold)
            .collect();
        entries.sort_by_key(|(c, _)| (c.len(), c.mask()));
        entries
    };
    let max_abs = kept
        .iter()
        .map(|(_, v)| v.abs())
        .fold(0.0f64, f64::max);
    let pen = |v: f64| -> f64 {
        if max_abs == 0.0 {
            1.0
        } else {
            1.0 + 4.0 * v.abs() / max_abs
        }
    };
    let color = |v: f64| -> &'static str {
        if v > 0.0 {
            "red"
        } else if v < 0.0 {
            "blue"
        } else {
            "gray"
        }
    };

    let mut out = String::new();
    out.push_str("graph interactions {\n");
    out.push_str("  layout=circo;\n");
    for (i, name) in names.iter().enumerate() {
        let singleton = kept
            .iter()
            .find(|(c, _)| c.len() == 1 && c.contains(i))
            .map(|(_, v)| *v);
        match singleton {
            Some(v) => out.push_str(&format!(
                "  \"{name}\" [label=\"{name}\\n{v:+.4}\", color={}, penwidth={:.2}];\n",
                color(v),
                pen(v)
            )),
            None => out.push_str(&format!("  \"{name}\" [label=\"{name}\"];\n")),
        }
    }
    let mut junction = 0usize;
    for (c, v) in &kept {
        match c.len() {
            0 | 1 => {}
            2 => {
                let m: Vec<usize> = c.members().collect();
                out.push_str(&format!(
                    "  \"{}\" -- \"{}\" [label=\"{v:+.4}\", color={}, penwidth={:.2}];\n",
                    names[m[0]],
                    names[m[1]],
                    color(*v),
                    pen(*v)
                ));
            }
            _ => {
                let id = format!("__j{junction}");
                junction += 1;
                out.push_str(&format!(
                    "  \"{id}\" [shape=diamond, label=\"{v:+.4}\", color={}];\n",
                    color(*v)
                ));
                for i in c.members() {
                    out.push_str(&format!(
                        "  \"{id}\" -- \"{}\" [color={}, penwidth={:.2}];\n",
                        names[i],
                        color(*v),
                        pen(*v)
                    ));
                }
            }
        }
    }
    out.push_str("}\n");
    out.into_bytes()
}

pub fn write_dot(
    path: impl AsRef<Path>,
    iv: &InteractionValues,
    threshold: f64,
) -> Result<(), Error> {
    write_atomic(path.as_ref(), &render_dot(iv, threshold))
}

/// Structural summary of a graph emitted by [`render_dot`], for validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DotSummary {
    pub player_nodes: usize,
    pub junction_nodes: usize,
    pub edges: usize,
}

/// Parses a graph in this crate's own DOT dialect back into counts.
pub fn read_dot_summary(path: impl AsRef<Path>) -> Result<DotSummary, Error> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if !text.starts_with("graph interactions {") || !text.trim_end().ends_with('}') {
        return Err(Error::format(path, "not a graph emitted by this crate".to_owned()));
    }
    let mut summary = DotSummary {
        player_nodes: 0,
        junction_nodes: 0,
        edges: 0,
    };
    for line in text.lines().skip(1) {
        let line = line.trim();
        if line.is_empty() || line == "}" || line.starts_with("layout=") {
            continue;
        }
        if !line.starts_with('"') || !line.ends_with(';') {
            return Err(Error::format(path, format!("unrecognized line `{line}`")));
        }
        if line.contains(" -- ") {
            summary.edges += 1;
        } else if line.starts_with("\"__j") {
            summary.junction_nodes += 1;
        } else {
            summary.player_nodes += 1;
        }
    }
    Ok(summary)
}

/// Writes `bytes` to `path` atomically: a unique temp file in the same
/// directory, flushed, then renamed over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .and_then(|f| f.to_str())
        .ok_or_else(|| Error::format(path, "output path has no file name".to_owned()))?;
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Collects rendered outputs and publishes them together: nothing reaches
/// its final path until every computation and staging write has succeeded.
#[derive(Default)]
pub struct OutputStage {
    staged: Vec<(PathBuf, PathBuf)>,
}

impl OutputStage {
    pub fn new() -> Self {
        OutputStage::default()
    }

    /// Writes `bytes` to a temp file next to `path` without publishing it.
    pub fn stage(&mut self, path: impl AsRef<Path>, bytes: &[u8]) -> Result<(), Error> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        if let Some(dir) = dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file_name = path
            .file_name()
            .and_then(|f| f.to_str())
            .ok_or_else(|| Error::format(path, "output path has no file name".to_owned()))?;
        let tmp = path.with_file_name(format!(
            ".{file_name}.stage{}-{}",
            std::process::id(),
            self.staged.len()
        ));
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        self.staged.push((path.to_path_buf(), tmp));
        Ok(())
    }

    /// Renames every staged file to its final path.
    pub fn commit(mut self) -> Result<(), Error> {
        for (path, tmp) in std::mem::take(&mut self.staged) {
            fs::rename(&tmp, &path).map_err(|e| {
                let _ = fs::remove_file(&tmp);
                Error::io(&path, e)
            })?;
        }
        Ok(())
    }
}

impl Drop for OutputStage {
    fn drop(&mut self) {
        for (_, tmp) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}
