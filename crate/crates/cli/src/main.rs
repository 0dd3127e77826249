//! `dipt`: simulate diffusion data, train, infer propagation forests,
//! evaluate, and check gradients. Every run writes `manifest.json` into its
//! output directory; `dipt replay` repeats a run from it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dipt::diagnostics::LossName;
use dipt::sim::Transmission;
use dipt::training::Ablation;

use dipt_cli::dataset::InstanceRange;
use dipt_cli::error::{CliError, CliResult};
use dipt_cli::params::{
    absolute, resolve, EvalParams, GradcheckParams, InferParams, Overrides, SimIdssParams, SimSiParams, TrainParams,
};
use dipt_cli::run::{differing_outputs, execute, Invocation, Manifest, Run};

#[derive(Parser)]
#[command(name = "dipt", version, about = "Propagation-forest inference from diffusion snapshots")]
#[command(after_help = "Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, env = "DIPT_OUTPUT_DIR", default_value = "dipt-out")]
    out: PathBuf,
    /// TOML file listing every parameter of the command; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for independent instances.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate datasets.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Infer sources and forests for observations.
    Infer(InferArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Repeat a run from its manifest.
    Replay(ReplayArgs),
}

#[derive(Subcommand)]
enum Simulate {
    /// SI diffusion on a random feature graph.
    Si(SiArgs),
    /// Spatial SIR epidemic over counties, collapsed to county forests.
    Idss(IdssArgs),
}

#[derive(Args)]
struct SiArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    mean_degree: Option<f64>,
    #[arg(long)]
    instances: Option<usize>,
    /// Sources per instance; 0 uses the seed fraction.
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long)]
    seed_fraction: Option<f64>,
    /// Draw sources from nodes 0..N; 0 means all nodes.
    #[arg(long)]
    source_pool: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_enum)]
    transmission: Option<TransmissionArg>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    planted_weight: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    planted_bias: Option<f64>,
    /// Run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Preset: the planted-transmission suite (50 nodes, 150 instances).
    #[arg(long)]
    planted_suite: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum TransmissionArg {
    Constant,
    Planted,
}

#[derive(Args)]
struct IdssArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    counties: Option<usize>,
    /// Population of every county.
    #[arg(long)]
    population: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    infectious_period_days: Option<usize>,
    /// Comma-separated per-day infection probabilities.
    #[arg(long, value_delimiter = ',')]
    daily_infection_prob: Option<Vec<f64>>,
    #[arg(long)]
    airport_counties: Option<usize>,
    #[arg(long)]
    initial_sources: Option<usize>,
    #[arg(long)]
    initial_infected: Option<usize>,
    #[arg(long)]
    horizon_days: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset directory (graph.txt, seeds_/obs_/forest_NNNN.txt).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Instances to use: `all`, `a..b` or `a..`.
    #[arg(long)]
    instances: Option<InstanceRange>,
    /// Fraction of true forest edges observed per instance.
    #[arg(long)]
    observed_fraction: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    tree_refresh_every: Option<usize>,
    #[arg(long, value_enum)]
    ablation: Option<AblationArg>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
enum AblationArg {
    Full,
    CosineInfluence,
    NoAlternating,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    common: Common,
    /// Directory with graph.txt and obs_NNNN.txt files.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    instances: Option<InstanceRange>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Directory with predicted seeds_/forest_ (and optional scores_) files.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Directory with true seeds_/forest_ files.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    instances: Option<InstanceRange>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    perturbation: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    inference_tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, hide = true, value_parser = parse_loss)]
    inject_sign_error: Option<LossName>,
}

fn parse_loss(s: &str) -> Result<LossName, String> {
    LossName::from_name(s).ok_or_else(|| format!("unknown loss `{s}`"))
}

#[derive(Args)]
struct ReplayArgs {
    /// manifest.json of the run to repeat.
    manifest: PathBuf,
    /// Where to write; defaults to `<run dir>-replay`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit with status 2 unless every output is byte-identical.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn ablation(a: AblationArg) -> Ablation {
    match a {
        AblationArg::Full => Ablation::Full,
        AblationArg::CosineInfluence => Ablation::CosineInfluence,
        AblationArg::NoAlternating => Ablation::NoAlternating,
    }
}

fn transmission(t: TransmissionArg) -> Transmission {
    match t {
        TransmissionArg::Constant => Transmission::Constant,
        TransmissionArg::Planted => Transmission::Planted,
    }
}

fn si_run(a: &SiArgs) -> CliResult<Run> {
    let mut o = Overrides::default();
    o.set("nodes", a.nodes)?;
    o.set("features", a.features)?;
    o.set("mean_degree", a.mean_degree)?;
    o.set("instances", a.instances)?;
    o.set("sources", a.sources)?;
    o.set("seed_fraction", a.seed_fraction)?;
    o.set("source_pool", a.source_pool)?;
    o.set("iterations", a.iterations)?;
    o.set("transmission", a.transmission.map(transmission))?;
    o.set("beta", a.beta)?;
    o.set("planted_weight", a.planted_weight)?;
    o.set("planted_bias", a.planted_bias)?;
    o.set("rng_seed", a.seed)?;
    let base = if a.planted_suite { SimSiParams::planted_suite(0) } else { SimSiParams::default() };
    let p = resolve(a.common.config.as_deref(), &base, &[], o)?;
    p.validate()?;
    Ok(Run::SimulateSi(p))
}

fn idss_run(a: &IdssArgs) -> CliResult<Run> {
    let mut o = Overrides::default();
    o.set("counties", a.counties)?;
    o.set("population", a.population)?;
    o.set("instances", a.instances)?;
    o.set("infectious_period_days", a.infectious_period_days)?;
    o.set("daily_infection_prob", a.daily_infection_prob.clone())?;
    o.set("airport_counties", a.airport_counties)?;
    o.set("initial_sources", a.initial_sources)?;
    o.set("initial_infected", a.initial_infected)?;
    o.set("horizon_days", a.horizon_days)?;
    o.set("rng_seed", a.seed)?;
    let p: SimIdssParams = resolve(a.common.config.as_deref(), &SimIdssParams::default(), &[], o)?;
    if p.instances == 0 {
        return Err(CliError::usage("instances must be positive"));
    }
    Ok(Run::SimulateIdss(p))
}

fn train_run(a: &TrainArgs) -> CliResult<Run> {
    let mut o = Overrides::default();
    o.path("data", a.data.as_deref())?;
    o.set("instances", a.instances)?;
    o.set("observed_fraction", a.observed_fraction)?;
    o.set("lr", a.lr)?;
    o.set("epochs", a.epochs)?;
    o.set("lambda", a.lambda)?;
    o.set("mu", a.mu)?;
    o.set("tree_refresh_every", a.tree_refresh_every)?;
    o.set("ablation", a.ablation.map(ablation))?;
    o.set("latent_dim", a.latent_dim)?;
    o.set("rng_seed", a.seed)?;
    let mut p: TrainParams = resolve(a.common.config.as_deref(), &TrainParams::default(), &["data"], o)?;
    p.data = absolute(&p.data)?;
    Ok(Run::Train(p))
}

fn infer_run(a: &InferArgs) -> CliResult<Run> {
    let mut o = Overrides::default();
    o.path("data", a.data.as_deref())?;
    o.path("checkpoint", a.checkpoint.as_deref())?;
    o.set("instances", a.instances)?;
    o.set("iterations", a.iterations)?;
    o.set("step_size", a.step_size)?;
    o.set("gamma", a.gamma)?;
    o.set("seed_threshold", a.seed_threshold)?;
    o.set("rng_seed", a.seed)?;
    let mut p: InferParams = resolve(a.common.config.as_deref(), &InferParams::default(), &["data", "checkpoint"], o)?;
    p.data = absolute(&p.data)?;
    p.checkpoint = absolute(&p.checkpoint)?;
    Ok(Run::Infer(p))
}

fn eval_run(a: &EvalArgs) -> CliResult<Run> {
    let mut o = Overrides::default();
    o.path("pred", a.pred.as_deref())?;
    o.path("truth", a.truth.as_deref())?;
    o.set("instances", a.instances)?;
    let mut p: EvalParams = resolve(a.common.config.as_deref(), &EvalParams::default(), &["pred", "truth"], o)?;
    p.pred = absolute(&p.pred)?;
    p.truth = absolute(&p.truth)?;
    Ok(Run::Eval(p))
}

fn gradcheck_run(a: &GradcheckArgs) -> CliResult<Run> {
    let mut o = Overrides::default();
    o.set("instances", a.instances)?;
    o.set("max_nodes", a.max_nodes)?;
    o.set("perturbation", a.perturbation)?;
    o.set("tolerance", a.tolerance)?;
    o.set("inference_tolerance", a.inference_tolerance)?;
    o.set("rng_seed", a.seed)?;
    o.set("inject_sign_error", a.inject_sign_error)?;
    let p: GradcheckParams = resolve(a.common.config.as_deref(), &GradcheckParams::default(), &[], o)?;
    p.config().validate()?;
    Ok(Run::Gradcheck(p))
}

fn replay(a: &ReplayArgs, argv: Vec<String>) -> CliResult<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let original = a.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out = match &a.out_dir {
        Some(d) => d.clone(),
        None => {
            let name = original.file_name().map_or_else(|| "run".into(), |n| n.to_string_lossy().into_owned());
            original.with_file_name(format!("{name}-replay"))
        }
    };
    let run = manifest.run()?;
    let inv = Invocation { argv, config_file: None, replay_of: Some(&a.manifest), jobs: a.jobs };
    execute(&run, &out, inv)?;
    if a.verify {
        let bad = differing_outputs(&manifest, &original, &out)?;
        if !bad.is_empty() {
            return Err(CliError::data(format!("replay differs in {}", bad.join(", "))));
        }
        println!("replay identical: {} files", manifest.outputs.len());
    }
    Ok(())
}

fn dispatch(cli: Cli, argv: Vec<String>) -> CliResult<()> {
    let (run, common) = match &cli.command {
        Command::Simulate(Simulate::Si(a)) => (si_run(a)?, &a.common),
        Command::Simulate(Simulate::Idss(a)) => (idss_run(a)?, &a.common),
        Command::Train(a) => (train_run(a)?, &a.common),
        Command::Infer(a) => (infer_run(a)?, &a.common),
        Command::Eval(a) => (eval_run(a)?, &a.common),
        Command::Gradcheck(a) => (gradcheck_run(a)?, &a.common),
        Command::Replay(a) => return replay(a, argv),
    };
    let config = common.config.as_deref().map(absolute).transpose()?;
    let inv = Invocation { argv, config_file: config.as_deref(), replay_of: None, jobs: common.jobs };
    execute(&run, &common.out, inv)?;
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
