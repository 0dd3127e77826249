use std::collections::BTreeSet;
use std::fmt::Write as _;

use dipt::checkpoint::{load_checkpoint, write_checkpoint};
use dipt::diagnostics::run_gradcheck;
use dipt::graph::{write_forest, write_graph, write_observation, write_scores, write_seeds, Graph};
use dipt::inference::optimize_latent;
use dipt::metrics::{evaluate_instance, report_csv};
use dipt::rng::{item_rng, stream_seed, Stream};
use dipt::sim::{forest_to_county_instance, simulate_idss as run_idss, synth_mobility, InfectionForest};
use dipt::training::{sample_observed_edges, train_alternating, TrainingSample};
use rand::Rng;

use crate::dataset::{self, instance_name, list_instances, OutDir, GRAPH_FILE};
use crate::error::{CliError, CliResult, WithPath};
use crate::params::{EvalParams, GradcheckParams, InferParams, SimIdssParams, SimSiParams, TrainParams};
use crate::pool::map_ordered;

fn write_instance(
    out: &mut OutDir,
    i: usize,
    s: &dipt::graph::SeedVector,
    y: &dipt::graph::DiffusionObservation,
    forest: &dipt::graph::PropagationForest,
) -> CliResult<()> {
    out.write(&instance_name("seeds", i, "txt"), &write_seeds(s))?;
    out.write(&instance_name("obs", i, "txt"), &write_observation(y))?;
    out.write(&instance_name("forest", i, "txt"), &write_forest(forest))
}

pub fn simulate_si(p: &SimSiParams, out: &mut OutDir, jobs: usize) -> CliResult<()> {
    let graph = p.generate_graph()?;
    let idx: Vec<usize> = (0..p.instances).collect();
    let results = map_ordered(&idx, jobs, |&i| p.generate_instance(&graph, i));
    out.write(GRAPH_FILE, &write_graph(&graph))?;
    for (i, r) in results.into_iter().enumerate() {
        let o = r?;
        write_instance(out, i, &o.s, &o.y, &o.forest)?;
    }
    eprintln!("simulated {} SI instances on {} nodes", p.instances, p.nodes);
    Ok(())
}

fn cases_csv(forest: &InfectionForest) -> String {
    let mut out = String::from("id,county,infected_day,recovered_day,parent\n");
    let opt = |v: Option<String>| v.unwrap_or_else(|| "NA".to_string());
    for c in &forest.individuals {
        writeln!(
            out,
            "{},{},{},{},{}",
            c.id,
            c.county,
            c.infected_day,
            opt(c.recovered_day.map(|d| d.to_string())),
            opt(c.parent.map(|d| d.to_string()))
        )
        .unwrap();
    }
    out
}

pub fn simulate_idss(p: &SimIdssParams, out: &mut OutDir, jobs: usize) -> CliResult<()> {
    p.idss_config(0).validate()?;
    let populations = vec![p.population; p.counties];
    let flows = synth_mobility(p.counties, &populations, stream_seed(p.rng_seed, Stream::Simulation))?;
    let idx: Vec<usize> = (0..p.instances).collect();
    let runs = map_ordered(&idx, jobs, |&i| {
        let seed = item_rng(p.rng_seed, Stream::Simulation, i as u64).random::<u64>();
        let (forest, sir) = run_idss(&p.idss_config(seed), &flows)?;
        let inst = forest_to_county_instance(&forest, &flows, &populations)?;
        Ok::<_, dipt::Error>((forest, sir, inst))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    // One graph for the whole dataset: the union of every instance's edges.
    let mut edges = BTreeSet::new();
    for (_, _, inst) in &runs {
        edges.extend(inst.graph.edges().iter().copied());
    }
    let features = match runs.first() {
        Some((_, _, inst)) => inst.graph.features().clone(),
        None => return Err(CliError::usage("instances must be positive")),
    };
    let graph = Graph::new(p.counties, edges.into_iter().collect(), features)?;
    out.write(GRAPH_FILE, &write_graph(&graph))?;
    for (i, (forest, sir, inst)) in runs.iter().enumerate() {
        write_instance(out, i, &inst.s, &inst.y, &inst.forest)?;
        out.write(&instance_name("sir", i, "csv"), &sir.to_csv())?;
        out.write(&instance_name("cases", i, "csv"), &cases_csv(forest))?;
        eprintln!("instance {i}: {} cases, {} infected counties", forest.len(), inst.y.count());
    }
    Ok(())
}

pub fn train(p: &TrainParams, out: &mut OutDir) -> CliResult<()> {
    let config = p.train_config();
    config.validate()?;
    if !(0.0..=1.0).contains(&p.observed_fraction) {
        return Err(CliError::usage("observed_fraction must lie in [0, 1]"));
    }
    let graph = dataset::read_graph(&p.data)?;
    let mut samples = Vec::new();
    for i in list_instances(&p.data, "seeds", p.instances)? {
        let t = dataset::read_truth(&p.data, &graph, i)?;
        let mut rng = item_rng(p.rng_seed, Stream::Training, i as u64);
        let obs = sample_observed_edges(&graph, &t.y, &t.forest, p.observed_fraction, &mut rng)
            .map_err(|e| CliError::from(e).context(format!("instance {i}")))?;
        samples.push(
            TrainingSample::new(&graph, t.s, t.y, obs)
                .map_err(|e| CliError::from(e).context(format!("instance {i}")))?,
        );
    }
    eprintln!("training on {} instances for {} epochs", samples.len(), config.epochs);
    let outcome = train_alternating(&graph, &mut samples, &config)?;
    out.write("model.ckpt", &write_checkpoint(&outcome.model))?;
    let mut curve = String::from("epoch,neg_elbo,diffusion,supervised,total\n");
    for r in &outcome.history {
        let l = &r.loss;
        writeln!(curve, "{},{},{},{},{}", r.epoch, l.neg_elbo, l.diffusion, l.supervised, l.total).unwrap();
    }
    out.write("loss.csv", &curve)?;
    if let Some(last) = outcome.history.last() {
        println!("final loss {:.6}", last.loss.total);
    }
    Ok(())
}

pub fn infer(p: &InferParams, out: &mut OutDir, jobs: usize) -> CliResult<()> {
    let config = p.inference_config();
    config.validate()?;
    let model = load_checkpoint(&p.checkpoint).at(&p.checkpoint)?;
    let graph = dataset::read_graph(&p.data)?;
    model.check_graph(&graph).map_err(|e| {
        CliError::from(e).context(format!("checkpoint {} does not fit the graph", p.checkpoint.display()))
    })?;
    let idx = list_instances(&p.data, "obs", p.instances)?;
    let results = map_ordered(&idx, jobs, |&i| {
        let y = dataset::read_observation(&p.data, i)?;
        optimize_latent(&model, &graph, &y, &config).map_err(|e| CliError::from(e).context(format!("instance {i}")))
    });
    for (&i, r) in idx.iter().zip(results) {
        let r = r?;
        out.write(&instance_name("seeds", i, "txt"), &write_seeds(&r.s_hat))?;
        out.write(&instance_name("forest", i, "txt"), &write_forest(&r.forest))?;
        out.write(&instance_name("scores", i, "txt"), &write_scores(&r.seed_prob))?;
        let mut trace = String::from("iteration,objective,best_so_far\n");
        for (t, (v, b)) in r.objective_trace.iter().zip(r.best_so_far()).enumerate() {
            writeln!(trace, "{t},{v},{b}").unwrap();
        }
        out.write(&instance_name("trace", i, "csv"), &trace)?;
        let latent = serde_json::json!({ "instance": i, "z_hat": r.z_hat, "y_hat": r.y_hat });
        out.write(&instance_name("latent", i, "json"), &(latent.to_string() + "\n"))?;
    }
    eprintln!("inferred {} instances", idx.len());
    Ok(())
}

pub fn eval(p: &EvalParams, out: &mut OutDir) -> CliResult<()> {
    let idx = list_instances(&p.pred, "seeds", p.instances)?;
    let mut names = Vec::new();
    let mut reports = Vec::new();
    for i in idx {
        let ps = dataset::read_seeds(&p.pred, i)?;
        let pf = dataset::read_forest(&p.pred, i)?;
        let scores = dataset::read_scores(&p.pred, i)?;
        let ts = dataset::read_seeds(&p.truth, i)?;
        let tf = dataset::read_forest(&p.truth, i)?;
        let r = evaluate_instance(&pf, &ps, scores.as_deref(), &tf, &ts)
            .map_err(|e| CliError::from(e).context(format!("instance {i}")))?;
        names.push(format!("{i:04}"));
        reports.push(r);
    }
    let csv = report_csv(&names, &reports);
    if let Some(mean) = csv.lines().last() {
        println!("{mean}");
    }
    out.write("report.csv", &csv)
}

pub fn gradcheck(p: &GradcheckParams, out: &mut OutDir) -> CliResult<Option<CliError>> {
    let checks = run_gradcheck(&p.config(), p.inject_sign_error)?;
    let mut csv = String::from("loss,max_rel_error,worst_instance,tolerance,checked,status\n");
    let mut failed = Vec::new();
    for c in &checks {
        let status = if c.passed() { "pass" } else { "fail" };
        writeln!(
            csv,
            "{},{:e},{},{:e},{},{status}",
            c.loss.name(),
            c.max_rel_error,
            c.worst_instance,
            c.tolerance,
            c.checked
        )
        .unwrap();
        println!(
            "{:<11} max relative error {:.3e} (tolerance {:.0e}) {status}",
            c.loss.name(),
            c.max_rel_error,
            c.tolerance
        );
        if !c.passed() {
            failed.push(c.loss.name());
        }
    }
    out.write("gradcheck.csv", &csv)?;
    Ok((!failed.is_empty()).then(|| CliError::numeric(format!("gradient check failed for {}", failed.join(", ")))))
}
