//! Alternating optimisation: re-infer forests with frozen parameters, then
//! take full-batch Adam steps on the joint loss with forests frozen.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DiffusionObservation, Graph, ObservedEdgeSet, PropagationForest, SeedVector};
use crate::influence::{build_influence_matrix, record_diffusion_nll, EdgeScorer, Influence};
use crate::model::{InfluenceKind, ModelState};
use crate::numeric::{AdamState, Tape, Var};
use crate::prior::{PriorVars, DEFAULT_LATENT_DIM};
use crate::rng::{stream_rng, Stream};
use crate::tree::infer_tree_from_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Full,
    CosineInfluence,
    NoAlternating,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::CosineInfluence => "cosine_influence",
            Ablation::NoAlternating => "no_alternating",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Ablation::Full),
            "cosine_influence" => Some(Ablation::CosineInfluence),
            "no_alternating" => Some(Ablation::NoAlternating),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub mu: f64,
    pub tree_refresh_every: usize,
    pub ablation: Ablation,
    pub latent_dim: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.005,
            epochs: 500,
            lambda: 1.0,
            mu: 1.0,
            tree_refresh_every: 1,
            ablation: Ablation::Full,
            latent_dim: DEFAULT_LATENT_DIM,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Usage("lr must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.mu >= 0.0) {
            return Err(Error::Usage("lambda and mu must be nonnegative".into()));
        }
        if self.tree_refresh_every == 0 {
            return Err(Error::Usage("tree_refresh_every must be at least 1".into()));
        }
        if self.latent_dim == 0 {
            return Err(Error::Usage("latent_dim must be at least 1".into()));
        }
        Ok(())
    }

    pub fn influence_kind(&self) -> InfluenceKind {
        match self.ablation {
            Ablation::CosineInfluence => InfluenceKind::Cosine,
            _ => InfluenceKind::Learned,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub s: SeedVector,
    pub y: DiffusionObservation,
    pub observed_edges: ObservedEdgeSet,
    /// Latest forest estimate; empty until the first refresh.
    pub current_tree: PropagationForest,
}

impl TrainingSample {
    pub fn new(graph: &Graph, s: SeedVector, y: DiffusionObservation, observed_edges: ObservedEdgeSet) -> Result<Self> {
        if s.len() != graph.n_nodes() || y.len() != graph.n_nodes() {
            return Err(Error::shape("sample size differs from the graph"));
        }
        s.check_consistent(&y)?;
        let current_tree = PropagationForest::empty(graph.n_nodes());
        Ok(Self { s, y, observed_edges, current_tree })
    }
}

/// Keeps `fraction` of the forest's edges, chosen uniformly.
pub fn sample_observed_edges<R: Rng + ?Sized>(
    graph: &Graph,
    y: &DiffusionObservation,
    forest: &PropagationForest,
    fraction: f64,
    rng: &mut R,
) -> Result<ObservedEdgeSet> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Usage("observed fraction must lie in [0, 1]".into()));
    }
    let edges = forest.edges();
    let k = (fraction * edges.len() as f64).round() as usize;
    let mut picked: Vec<usize> = sample_indices(rng, edges.len(), k).into_vec();
    picked.sort_unstable();
    ObservedEdgeSet::new(graph, y, picked.into_iter().map(|i| edges[i]))
}

fn record_supervised(tape: &mut Tape, scorer: &mut EdgeScorer<'_>, observed: &ObservedEdgeSet) -> Result<Var> {
    let mut terms = Vec::with_capacity(observed.len());
    for (u, v) in observed.iter() {
        let p = scorer.score(tape, u, v)?;
        let l = tape.log(p);
        terms.push(tape.affine(l, -1.0, 0.0));
    }
    Ok(tape.sum_scalars(&terms))
}

/// `-sum log f(u -> v)` over the observed infector-infected pairs, with its
/// gradient w.r.t. the influence parameters.
pub fn supervised_edge_loss(
    influence: &Influence,
    graph: &Graph,
    observed: &ObservedEdgeSet,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let mut scorer = EdgeScorer::new(&mut tape, influence, graph);
    let loss = record_supervised(&mut tape, &mut scorer, observed)?;
    let mut flat = Vec::with_capacity(influence.param_count());
    if !tape.is_empty() && !observed.is_empty() {
        let grads = tape.backward(loss, &[1.0])?;
        scorer.gradient_into(&grads, &mut flat);
    } else {
        flat.resize(influence.param_count(), 0.0);
    }
    Ok((tape.scalar(loss), flat))
}

/// Value of each loss term; `total = neg_elbo + lambda * diffusion + mu * supervised`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub neg_elbo: f64,
    pub diffusion: f64,
    pub supervised: f64,
    pub total: f64,
}

struct Recorded {
    neg_elbo: Var,
    diffusion: Var,
    supervised: Var,
}

fn record_sample(
    tape: &mut Tape,
    model: &ModelState,
    prior_vars: &PriorVars,
    scorer: &mut EdgeScorer<'_>,
    graph: &Graph,
    sample: &TrainingSample,
    noise: &[f64],
) -> Result<Recorded> {
    let (neg_elbo, _) = model.prior.record_neg_elbo(tape, prior_vars, &sample.s, noise)?;
    let diffusion = record_diffusion_nll(tape, scorer, graph, &sample.y, &sample.s, &sample.current_tree)?;
    let supervised = record_supervised(tape, scorer, &sample.observed_edges)?;
    Ok(Recorded { neg_elbo, diffusion, supervised })
}

/// Mean joint loss over `samples` and its gradient in [`ModelState::flatten`]
/// order. Forests and ELBO noise are held fixed.
pub fn batch_loss(
    model: &ModelState,
    graph: &Graph,
    samples: &[TrainingSample],
    noise: &[Vec<f64>],
    lambda: f64,
    mu: f64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Usage("empty training batch".into()));
    }
    if noise.len() != samples.len() {
        return Err(Error::shape("one noise vector per sample is required"));
    }
    let mut tape = Tape::new();
    let prior_vars = model.prior.register(&mut tape);
    let mut scorer = EdgeScorer::new(&mut tape, &model.influence, graph);
    let mut parts = Vec::with_capacity(samples.len());
    for (idx, (sample, eps)) in samples.iter().zip(noise).enumerate() {
        let r = record_sample(&mut tape, model, &prior_vars, &mut scorer, graph, sample, eps).map_err(|e| match e {
            Error::Contract(m) => Error::Contract(format!("sample {idx}: {m}")),
            other => other,
        })?;
        parts.push(r);
    }
    let scale = 1.0 / samples.len() as f64;
    let sum_of = |tape: &mut Tape, pick: fn(&Recorded) -> Var| {
        let vars: Vec<Var> = parts.iter().map(pick).collect();
        let s = tape.sum_scalars(&vars);
        tape.affine(s, scale, 0.0)
    };
    let neg_elbo = sum_of(&mut tape, |r| r.neg_elbo);
    let diffusion = sum_of(&mut tape, |r| r.diffusion);
    let supervised = sum_of(&mut tape, |r| r.supervised);
    let wd = tape.affine(diffusion, lambda, 0.0);
    let ws = tape.affine(supervised, mu, 0.0);
    let total = tape.sum_scalars(&[neg_elbo, wd, ws]);

    let breakdown = LossBreakdown {
        neg_elbo: tape.scalar(neg_elbo),
        diffusion: tape.scalar(diffusion),
        supervised: tape.scalar(supervised),
        total: tape.scalar(total),
    };
    let grads = tape.backward(total, &[1.0])?;
    let mut flat = Vec::with_capacity(model.param_count());
    scorer.gradient_into(&grads, &mut flat);
    prior_vars.gradient_into(&grads, &mut flat);
    Ok((breakdown, flat))
}

/// Joint loss of one sample: `-ELBO + lambda * diffusion + mu * supervised`.
pub fn total_loss(
    model: &ModelState,
    graph: &Graph,
    sample: &TrainingSample,
    config: &TrainConfig,
    noise: &[f64],
) -> Result<(LossBreakdown, Vec<f64>)> {
    batch_loss(model, graph, std::slice::from_ref(sample), &[noise.to_vec()], config.lambda, config.mu)
}

/// Re-infers every sample's forest with the current parameters, seeding
/// propagation with the true sources and keeping observed edges.
pub fn refresh_trees(model: &ModelState, graph: &Graph, dataset: &mut [TrainingSample]) -> Result<()> {
    let matrix = build_influence_matrix(&model.influence, graph)?;
    for (idx, sample) in dataset.iter_mut().enumerate() {
        let (forest, _) = infer_tree_from_matrix(&matrix, graph, &sample.y, &sample.s, Some(&sample.observed_edges))
            .map_err(|e| match e {
                Error::Orphan(nodes) => {
                    Error::Contract(format!("sample {idx}: infected nodes {nodes:?} are unreachable from the seeds"))
                }
                other => other,
            })?;
        sample.current_tree = forest;
    }
    Ok(())
}

/// Mean posterior mean over the dataset's seed sets.
pub fn mean_latent(model: &ModelState, dataset: &[TrainingSample]) -> Result<Vec<f64>> {
    let d = model.prior.latent_dim();
    let mut acc = vec![0.0; d];
    for sample in dataset {
        let (mu, _) = model.prior.encode(&sample.s)?;
        for (a, m) in acc.iter_mut().zip(mu) {
            *a += m;
        }
    }
    let n = dataset.len().max(1) as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelState,
    pub history: Vec<EpochRecord>,
}

/// Initialises a model from the run seed and trains it.
pub fn train_alternating(graph: &Graph, dataset: &mut [TrainingSample], config: &TrainConfig) -> Result<TrainOutcome> {
    let mut init = stream_rng(config.rng_seed, Stream::Init);
    let model =
        ModelState::init(graph.n_nodes(), graph.feature_dim(), config.latent_dim, config.influence_kind(), &mut init);
    train_from(model, graph, dataset, config)
}

/// Trains an existing model. With zero epochs the parameters are returned
/// untouched and `z_bar` stays undefined.
pub fn train_from(
    mut model: ModelState,
    graph: &Graph,
    dataset: &mut [TrainingSample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Usage("training needs at least one sample".into()));
    }
    model.check_graph(graph)?;
    for (idx, s) in dataset.iter().enumerate() {
        if s.s.len() != graph.n_nodes() || s.y.len() != graph.n_nodes() {
            return Err(Error::shape(format!("sample {idx} size differs from the graph")));
        }
    }
    model.mean_seed_count = dataset.iter().map(|s| s.s.count() as f64).sum::<f64>() / dataset.len() as f64;
    let mut history = Vec::with_capacity(config.epochs);
    if config.epochs == 0 {
        model.prior.z_bar = None;
        return Ok(TrainOutcome { model, history });
    }

    let mut rng = stream_rng(config.rng_seed, Stream::Training);
    let mut params = model.flatten();
    let mut adam = AdamState::new(params.len(), config.lr);
    let d = model.prior.latent_dim();
    for epoch in 0..config.epochs {
        let refresh = match config.ablation {
            Ablation::NoAlternating => epoch == 0,
            _ => epoch % config.tree_refresh_every == 0,
        };
        if refresh {
            refresh_trees(&model, graph, dataset)?;
        }
        let noise: Vec<Vec<f64>> =
            dataset.iter().map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let (loss, grads) = batch_loss(&model, graph, dataset, &noise, config.lambda, config.mu)?;
        if !loss.total.is_finite() {
            let worst = first_non_finite_sample(&model, graph, dataset, &noise, config);
            return Err(Error::Numeric(format!(
                "non-finite loss at epoch {epoch}{}",
                worst.map_or(String::new(), |i| format!(", sample {i}"))
            )));
        }
        history.push(EpochRecord { epoch, loss });
        adam.step(&mut params, &grads).map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        model.assign(&params)?;
    }
    model.prior.z_bar = Some(mean_latent(&model, dataset)?);
    Ok(TrainOutcome { model, history })
}

fn first_non_finite_sample(
    model: &ModelState,
    graph: &Graph,
    dataset: &[TrainingSample],
    noise: &[Vec<f64>],
    config: &TrainConfig,
) -> Option<usize> {
    dataset
        .iter()
        .zip(noise)
        .position(|(s, eps)| total_loss(model, graph, s, config, eps).is_ok_and(|(l, _)| !l.total.is_finite()))
}
