//! Executable runs, their manifests, and replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dipt::rng::{stream_seed, Stream};
use serde::{Deserialize, Serialize};

use crate::commands;
use crate::dataset::OutDir;
use crate::error::{CliError, CliResult, WithPath};
use crate::params::{EvalParams, GradcheckParams, InferParams, SimIdssParams, SimSiParams, TrainParams};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Run {
    SimulateSi(SimSiParams),
    SimulateIdss(SimIdssParams),
    Train(TrainParams),
    Infer(InferParams),
    Eval(EvalParams),
    Gradcheck(GradcheckParams),
}

impl Run {
    pub fn command(&self) -> &'static str {
        match self {
            Run::SimulateSi(_) => "simulate-si",
            Run::SimulateIdss(_) => "simulate-idss",
            Run::Train(_) => "train",
            Run::Infer(_) => "infer",
            Run::Eval(_) => "eval",
            Run::Gradcheck(_) => "gradcheck",
        }
    }

    fn params_json(&self) -> serde_json::Value {
        let v = match self {
            Run::SimulateSi(p) => serde_json::to_value(p),
            Run::SimulateIdss(p) => serde_json::to_value(p),
            Run::Train(p) => serde_json::to_value(p),
            Run::Infer(p) => serde_json::to_value(p),
            Run::Eval(p) => serde_json::to_value(p),
            Run::Gradcheck(p) => serde_json::to_value(p),
        };
        v.expect("parameters serialize to JSON")
    }

    pub fn from_json(command: &str, params: serde_json::Value) -> CliResult<Self> {
        let bad = |e: serde_json::Error| CliError::data(format!("manifest parameters: {e}"));
        Ok(match command {
            "simulate-si" => Run::SimulateSi(serde_json::from_value(params).map_err(bad)?),
            "simulate-idss" => Run::SimulateIdss(serde_json::from_value(params).map_err(bad)?),
            "train" => Run::Train(serde_json::from_value(params).map_err(bad)?),
            "infer" => Run::Infer(serde_json::from_value(params).map_err(bad)?),
            "eval" => Run::Eval(serde_json::from_value(params).map_err(bad)?),
            "gradcheck" => Run::Gradcheck(serde_json::from_value(params).map_err(bad)?),
            other => return Err(CliError::data(format!("manifest names unknown command `{other}`"))),
        })
    }

    fn run_seed(&self) -> Option<u64> {
        match self {
            Run::SimulateSi(p) => Some(p.rng_seed),
            Run::SimulateIdss(p) => Some(p.rng_seed),
            Run::Train(p) => Some(p.rng_seed),
            Run::Infer(p) => Some(p.rng_seed),
            Run::Eval(_) => None,
            Run::Gradcheck(p) => Some(p.rng_seed),
        }
    }

    fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Run::Train(p) => vec![p.data.clone()],
            Run::Infer(p) => vec![p.data.clone(), p.checkpoint.clone()],
            Run::Eval(p) => vec![p.pred.clone(), p.truth.clone()],
            _ => Vec::new(),
        }
    }

    /// Writes the run's outputs. `Ok(Some(e))` means the run completed but
    /// its check failed.
    fn execute(&self, out: &mut OutDir, jobs: usize) -> CliResult<Option<CliError>> {
        match self {
            Run::SimulateSi(p) => commands::simulate_si(p, out, jobs).map(|_| None),
            Run::SimulateIdss(p) => commands::simulate_idss(p, out, jobs).map(|_| None),
            Run::Train(p) => commands::train(p, out).map(|_| None),
            Run::Infer(p) => commands::infer(p, out, jobs).map(|_| None),
            Run::Eval(p) => commands::eval(p, out).map(|_| None),
            Run::Gradcheck(p) => commands::gradcheck(p, out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub started_unix_secs: f64,
    pub wall_seconds: f64,
}

/// Everything needed to repeat a run. Timings are the only field that
/// differs between a run and its replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub config_file: Option<PathBuf>,
    pub replay_of: Option<PathBuf>,
    pub params: serde_json::Value,
    /// Run seed and the derived per-stream seeds.
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<String>,
    pub timings: Timings,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).at(path)?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::data(e.to_string()))
    }

    pub fn run(&self) -> CliResult<Run> {
        Run::from_json(&self.command, self.params.clone())
    }
}

fn seeds(run_seed: Option<u64>) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    if let Some(s) = run_seed {
        out.insert("run".to_string(), s);
        for st in [Stream::Simulation, Stream::Init, Stream::Training, Stream::Inference] {
            out.insert(st.name().to_string(), stream_seed(s, st));
        }
    }
    out
}

/// Writes `value` to `path` via a temporary file and a rename.
fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, contents).at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

pub struct Invocation<'a> {
    pub argv: Vec<String>,
    pub config_file: Option<&'a Path>,
    pub replay_of: Option<&'a Path>,
    pub jobs: usize,
}

/// Executes `run` into `out_root` and writes its manifest last.
pub fn execute(run: &Run, out_root: &Path, inv: Invocation<'_>) -> CliResult<Manifest> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let mut out = OutDir::create(out_root)?;
    let status = run.execute(&mut out, inv.jobs.max(1))?;
    let manifest = Manifest {
        tool: "dipt".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: run.command().to_string(),
        argv: inv.argv,
        config_file: inv.config_file.map(Path::to_path_buf),
        replay_of: inv.replay_of.map(Path::to_path_buf),
        params: run.params_json(),
        seeds: seeds(run.run_seed()),
        inputs: run.inputs(),
        outputs: out.files.clone(),
        timings: Timings { started_unix_secs: started, wall_seconds: clock.elapsed().as_secs_f64() },
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&out_root.join(MANIFEST_FILE), &text)?;
    match status {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Output files whose bytes differ between two run directories.
pub fn differing_outputs(manifest: &Manifest, original: &Path, replayed: &Path) -> CliResult<Vec<String>> {
    let mut bad = Vec::new();
    for name in &manifest.outputs {
        let a = fs::read(original.join(name)).at(&original.join(name))?;
        let b = fs::read(replayed.join(name)).ok();
        if b.as_deref() != Some(a.as_slice()) {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}
