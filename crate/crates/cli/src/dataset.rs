//! Dataset directories: `graph.txt` plus per-instance files named
//! `<kind>_<index>.txt` with a four-digit zero-padded index.

use std::fs;
use std::path::{Path, PathBuf};

use dipt::graph::{load_forest, load_graph, load_observation, load_scores, load_seeds};
use dipt::graph::{DiffusionObservation, Graph, PropagationForest, SeedVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, WithPath};

pub const GRAPH_FILE: &str = "graph.txt";

pub fn instance_name(kind: &str, index: usize, ext: &str) -> String {
    format!("{kind}_{index:04}.{ext}")
}

/// Half-open instance range; written `all`, `a..b` or `a..`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceRange {
    pub start: usize,
    pub end: Option<usize>,
}

impl InstanceRange {
    pub const ALL: Self = Self { start: 0, end: None };

    pub fn contains(&self, i: usize) -> bool {
        i >= self.start && self.end.is_none_or(|e| i < e)
    }
}

impl std::str::FromStr for InstanceRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "all" {
            return Ok(Self::ALL);
        }
        let bad = || format!("invalid instance range `{s}`; expected `all`, `a..b` or `a..`");
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let start = if a.is_empty() { 0 } else { a.parse().map_err(|_| bad())? };
        let end = if b.is_empty() { None } else { Some(b.parse().map_err(|_| bad())?) };
        if end.is_some_and(|e| e < start) {
            return Err(bad());
        }
        Ok(Self { start, end })
    }
}

impl std::fmt::Display for InstanceRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.start, self.end) {
            (0, None) => f.write_str("all"),
            (a, None) => write!(f, "{a}.."),
            (a, Some(b)) => write!(f, "{a}..{b}"),
        }
    }
}

impl Serialize for InstanceRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InstanceRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sorted indices of `<kind>_NNNN.txt` files in `dir` within `range`.
pub fn list_instances(dir: &Path, kind: &str, range: InstanceRange) -> CliResult<Vec<usize>> {
    let prefix = format!("{kind}_");
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let name = entry.at(dir)?.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(idx) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".txt")) else {
            continue;
        };
        if let Ok(i) = idx.parse::<usize>() {
            if range.contains(i) {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    if out.is_empty() {
        return Err(CliError::data(format!("no {kind}_NNNN.txt files for range {range}")).context(dir.display()));
    }
    Ok(out)
}

pub fn path(dir: &Path, kind: &str, index: usize) -> PathBuf {
    dir.join(instance_name(kind, index, "txt"))
}

pub fn read_graph(dir: &Path) -> CliResult<Graph> {
    let p = dir.join(GRAPH_FILE);
    load_graph(&p).at(&p)
}

pub fn read_seeds(dir: &Path, index: usize) -> CliResult<SeedVector> {
    let p = path(dir, "seeds", index);
    load_seeds(&p).at(&p)
}

pub fn read_observation(dir: &Path, index: usize) -> CliResult<DiffusionObservation> {
    let p = path(dir, "obs", index);
    load_observation(&p).at(&p)
}

pub fn read_forest(dir: &Path, index: usize) -> CliResult<PropagationForest> {
    let p = path(dir, "forest", index);
    load_forest(&p).at(&p)
}

/// Scores are optional; a missing file yields `None`.
pub fn read_scores(dir: &Path, index: usize) -> CliResult<Option<Vec<f64>>> {
    let p = path(dir, "scores", index);
    if !p.exists() {
        return Ok(None);
    }
    load_scores(&p).at(&p).map(Some)
}

/// Ground truth of one instance.
pub struct Truth {
    pub s: SeedVector,
    pub y: DiffusionObservation,
    pub forest: PropagationForest,
}

pub fn read_truth(dir: &Path, graph: &Graph, index: usize) -> CliResult<Truth> {
    let s = read_seeds(dir, index)?;
    let y = read_observation(dir, index)?;
    let forest = read_forest(dir, index)?;
    let n = graph.n_nodes();
    if s.len() != n || y.len() != n || forest.len() != n {
        return Err(CliError::data(format!("instance {index} covers a different node count than the {n}-node graph"))
            .context(dir.display()));
    }
    Ok(Truth { s, y, forest })
}

/// Collects written files, relative to the output root.
pub struct OutDir {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).at(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let p = self.root.join(name);
        fs::write(&p, contents).at(&p)?;
        self.files.push(name.to_string());
        Ok(())
    }
}
