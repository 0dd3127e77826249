//! Learned per-edge infection probabilities and the diffusion likelihood.
//!
//! Orientation: an entry `(j, i)` of an [`InfluenceMatrix`] is the
//! probability that node `j` infects node `i`, i.e. `f(F_i, F_j)` with `j`
//! in the parent role.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{validate_forest, DiffusionObservation, Graph, PropagationForest, SeedVector};
use crate::numeric::{
    attention_fuse, clamp_prob, dot, record_attention, Activation, Gradients, MlpParams, MlpVars, Tape, Var, PROB_EPS,
};

/// Hidden widths of the node encoder (last entry is the embedding size).
pub const ENCODER_WIDTHS: [usize; 3] = [64, 32, 16];
/// Hidden width of the two-layer scorer.
pub const SCORER_HIDDEN: usize = 16;

/// Feature encoder, endpoint attention and scorer.
///
/// The child embedding queries both endpoint embeddings; the attended
/// vector is concatenated with the child embedding and scored.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceNet {
    encoder: MlpParams,
    scorer: MlpParams,
}

impl InfluenceNet {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, rng: &mut R) -> Self {
        Self::with_widths(feature_dim, &ENCODER_WIDTHS, SCORER_HIDDEN, rng)
    }

    pub fn with_widths<R: Rng + ?Sized>(
        feature_dim: usize,
        encoder_widths: &[usize],
        scorer_hidden: usize,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![feature_dim];
        dims.extend_from_slice(encoder_widths);
        let mut acts = vec![Activation::Tanh; encoder_widths.len()];
        *acts.last_mut().expect("encoder needs a layer") = Activation::Identity;
        let encoder = MlpParams::glorot(&dims, &acts, rng);
        let emb = *encoder_widths.last().unwrap();
        let scorer = MlpParams::glorot(&[2 * emb, scorer_hidden, 1], &[Activation::Tanh, Activation::Sigmoid], rng);
        Self { encoder, scorer }
    }

    pub fn from_parts(encoder: MlpParams, scorer: MlpParams) -> Result<Self> {
        if scorer.input_dim() != 2 * encoder.output_dim() || scorer.output_dim() != 1 {
            return Err(Error::shape(format!(
                "scorer maps {} -> {} but the encoder embeds into {}",
                scorer.input_dim(),
                scorer.output_dim(),
                encoder.output_dim()
            )));
        }
        Ok(Self { encoder, scorer })
    }

    pub fn encoder(&self) -> &MlpParams {
        &self.encoder
    }

    pub fn scorer(&self) -> &MlpParams {
        &self.scorer
    }

    pub fn scorer_mut(&mut self) -> &mut MlpParams {
        &mut self.scorer
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn embed(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(features)
    }

    /// Probability that the node embedded as `parent` infects `child`.
    pub fn score_embedded(&self, parent: &[f64], child: &[f64]) -> Result<f64> {
        let d = self.embedding_dim();
        let attended = attention_fuse(child, &[parent, child], &[parent, child], d)?;
        let mut fused = attended;
        fused.extend_from_slice(child);
        Ok(clamp_prob(self.scorer.forward(&fused)?[0]))
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.scorer.param_count()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        self.encoder.flatten_into(out);
        self.scorer.flatten_into(out);
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<usize> {
        let a = self.encoder.assign(flat)?;
        let b = self.scorer.assign(&flat[a..])?;
        Ok(a + b)
    }
}

/// Learned influence, or the feature-cosine stand-in used for ablation.
#[derive(Debug, Clone, PartialEq)]
pub enum Influence {
    Learned(InfluenceNet),
    Cosine,
}

impl Influence {
    pub fn param_count(&self) -> usize {
        match self {
            Influence::Learned(net) => net.param_count(),
            Influence::Cosine => 0,
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        if let Influence::Learned(net) = self {
            net.flatten_into(out);
        }
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<usize> {
        match self {
            Influence::Learned(net) => net.assign(flat),
            Influence::Cosine => Ok(0),
        }
    }

    /// `f(child, parent)` from raw feature vectors.
    pub fn score(&self, parent_features: &[f64], child_features: &[f64]) -> Result<f64> {
        match self {
            Influence::Learned(net) => influence_score(net, parent_features, child_features),
            Influence::Cosine => {
                if parent_features.len() != child_features.len() {
                    return Err(Error::shape("feature vectors differ in length"));
                }
                Ok(cosine_influence(parent_features, child_features))
            }
        }
    }
}

/// Probability that a node with `parent_features` infects one with `child_features`.
pub fn influence_score(net: &InfluenceNet, parent_features: &[f64], child_features: &[f64]) -> Result<f64> {
    let p = net.embed(parent_features)?;
    let c = net.embed(child_features)?;
    net.score_embedded(&p, &c)
}

/// `(cos + 1) / 2`, clamped into the open unit interval; 0.5 for a zero vector.
pub fn cosine_influence(parent_features: &[f64], child_features: &[f64]) -> f64 {
    let na = dot(parent_features, parent_features).sqrt();
    let nb = dot(child_features, child_features).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.5;
    }
    let cos = (dot(parent_features, child_features) / (na * nb)).clamp(-1.0, 1.0);
    clamp_prob((cos + 1.0) / 2.0)
}

/// Sparse edge probabilities, stored per target node.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    incoming: Vec<Vec<(usize, f64)>>,
}

impl InfluenceMatrix {
    pub fn new(n_nodes: usize, entries: impl IntoIterator<Item = ((usize, usize), f64)>) -> Self {
        let mut incoming = vec![Vec::new(); n_nodes];
        for ((j, i), p) in entries {
            incoming[i].push((j, p));
        }
        for list in &mut incoming {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        Self { incoming }
    }

    pub fn n_nodes(&self) -> usize {
        self.incoming.len()
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        self.incoming.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Probability that `j` infects `i`; zero off the edge set.
    pub fn get(&self, j: usize, i: usize) -> f64 {
        let list = &self.incoming[i];
        list.binary_search_by_key(&j, |&(s, _)| s).map_or(0.0, |k| list[k].1)
    }

    /// `(source, probability)` pairs into `i`, ascending by source.
    pub fn incoming(&self, i: usize) -> &[(usize, f64)] {
        &self.incoming[i]
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.incoming.iter().enumerate().flat_map(|(i, list)| list.iter().map(move |&(j, p)| ((j, i), p)))
    }

    /// Keeps the entries for which `keep(source, target)` holds.
    pub fn restricted(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let incoming = self
            .incoming
            .iter()
            .enumerate()
            .map(|(i, list)| list.iter().copied().filter(|&(j, _)| keep(j, i)).collect())
            .collect();
        Self { incoming }
    }
}

/// One entry per directed edge.
pub fn build_influence_matrix(influence: &Influence, graph: &Graph) -> Result<InfluenceMatrix> {
    let n = graph.n_nodes();
    let entries: Vec<((usize, usize), f64)> = match influence {
        Influence::Learned(net) => {
            let emb = (0..n).map(|v| net.embed(graph.feature(v))).collect::<Result<Vec<_>>>()?;
            graph
                .edges()
                .iter()
                .map(|&(j, i)| Ok(((j, i), net.score_embedded(&emb[j], &emb[i])?)))
                .collect::<Result<_>>()?
        }
        Influence::Cosine => {
            graph.edges().iter().map(|&(j, i)| ((j, i), cosine_influence(graph.feature(j), graph.feature(i)))).collect()
        }
    };
    Ok(InfluenceMatrix::new(n, entries))
}

/// Records edge probabilities on a tape, sharing node embeddings and
/// caching each edge.
pub struct EdgeScorer<'a> {
    influence: &'a Influence,
    graph: &'a Graph,
    vars: Option<(MlpVars, MlpVars)>,
    embeddings: HashMap<usize, Var>,
    scores: HashMap<(usize, usize), Var>,
}

impl<'a> EdgeScorer<'a> {
    pub fn new(tape: &mut Tape, influence: &'a Influence, graph: &'a Graph) -> Self {
        let vars = match influence {
            Influence::Learned(net) => Some((net.encoder.register(tape), net.scorer.register(tape))),
            Influence::Cosine => None,
        };
        Self { influence, graph, vars, embeddings: HashMap::new(), scores: HashMap::new() }
    }

    fn embedding(&mut self, tape: &mut Tape, net: &InfluenceNet, v: usize) -> Result<Var> {
        if let Some(&e) = self.embeddings.get(&v) {
            return Ok(e);
        }
        let x = tape.constant(self.graph.feature(v).to_vec());
        let enc = &self.vars.as_ref().expect("learned influence has vars").0;
        let e = net.encoder.record(tape, enc, x)?;
        self.embeddings.insert(v, e);
        Ok(e)
    }

    /// Clamped probability that `parent` infects `child`.
    pub fn score(&mut self, tape: &mut Tape, parent: usize, child: usize) -> Result<Var> {
        if let Some(&s) = self.scores.get(&(parent, child)) {
            return Ok(s);
        }
        let s = match self.influence {
            Influence::Learned(net) => {
                let p = self.embedding(tape, net, parent)?;
                let c = self.embedding(tape, net, child)?;
                let attended = record_attention(tape, c, &[p, c], &[p, c], net.embedding_dim())?;
                let fused = tape.concat(&[attended, c]);
                let sc = &self.vars.as_ref().expect("learned influence has vars").1;
                let raw = net.scorer.record(tape, sc, fused)?;
                tape.clamp(raw, PROB_EPS, 1.0 - PROB_EPS)
            }
            Influence::Cosine => {
                tape.constant(vec![cosine_influence(self.graph.feature(parent), self.graph.feature(child))])
            }
        };
        self.scores.insert((parent, child), s);
        Ok(s)
    }

    /// Appends the gradient w.r.t. the influence parameters in flatten order.
    pub fn gradient_into(&self, grads: &Gradients, out: &mut Vec<f64>) {
        if let Some((enc, sc)) = &self.vars {
            enc.gradient_into(grads, out);
            sc.gradient_into(grads, out);
        }
    }
}

/// Records the diffusion negative log-likelihood of one snapshot.
///
/// Infected non-seeds contribute `-log p(parent -> node)`. Uninfected nodes
/// with at least one infected in-neighbour contribute `-log(1 - max p)`
/// over those neighbours; other uninfected nodes contribute nothing.
pub fn record_diffusion_nll(
    tape: &mut Tape,
    scorer: &mut EdgeScorer<'_>,
    graph: &Graph,
    y: &DiffusionObservation,
    s: &SeedVector,
    forest: &PropagationForest,
) -> Result<Var> {
    let mut terms = Vec::new();
    for v in 0..graph.n_nodes() {
        if y.is_infected(v) {
            if s.is_seed(v) {
                continue;
            }
            let p = forest.parent[v].ok_or_else(|| Error::Contract(format!("infected node {v} has no parent")))?;
            let sc = scorer.score(tape, p, v)?;
            let l = tape.log(sc);
            terms.push(tape.affine(l, -1.0, 0.0));
        } else {
            let cands: Vec<usize> = graph.in_neighbors(v).iter().copied().filter(|&j| y.is_infected(j)).collect();
            if cands.is_empty() {
                continue;
            }
            let scores = cands.iter().map(|&j| scorer.score(tape, j, v)).collect::<Result<Vec<_>>>()?;
            let best = tape.max_of(&scores)?;
            let miss = tape.affine(best, -1.0, 1.0);
            let l = tape.log(miss);
            terms.push(tape.affine(l, -1.0, 0.0));
        }
    }
    Ok(tape.sum_scalars(&terms))
}

fn check_forest(graph: &Graph, y: &DiffusionObservation, s: &SeedVector, forest: &PropagationForest) -> Result<()> {
    let violations = validate_forest(forest, graph, y, s);
    if let Some(v) = violations.first() {
        return Err(Error::Contract(format!("invalid forest: {v}")));
    }
    Ok(())
}

/// Log-likelihood of the snapshot under the forest, including the
/// uninfected-frontier terms.
pub fn diffusion_log_likelihood(
    influence: &Influence,
    graph: &Graph,
    y: &DiffusionObservation,
    s: &SeedVector,
    forest: &PropagationForest,
) -> Result<f64> {
    check_forest(graph, y, s, forest)?;
    let mut ll = 0.0;
    for v in 0..graph.n_nodes() {
        if y.is_infected(v) {
            if let Some(p) = forest.parent[v] {
                ll += influence.score(graph.feature(p), graph.feature(v))?.ln();
            }
        } else {
            let mut best: Option<f64> = None;
            for &j in graph.in_neighbors(v) {
                if y.is_infected(j) {
                    let p = influence.score(graph.feature(j), graph.feature(v))?;
                    best = Some(best.map_or(p, |b| b.max(p)));
                }
            }
            if let Some(b) = best {
                ll += (1.0 - b).ln();
            }
        }
    }
    Ok(ll)
}

/// Diffusion loss (negative log-likelihood) and its gradient w.r.t. the
/// influence parameters.
pub fn diffusion_loss(
    influence: &Influence,
    graph: &Graph,
    y: &DiffusionObservation,
    s: &SeedVector,
    forest: &PropagationForest,
) -> Result<(f64, Vec<f64>)> {
    check_forest(graph, y, s, forest)?;
    let mut tape = Tape::new();
    let mut scorer = EdgeScorer::new(&mut tape, influence, graph);
    let loss = record_diffusion_nll(&mut tape, &mut scorer, graph, y, s, forest)?;
    let grads = tape.backward(loss, &[1.0])?;
    let mut flat = Vec::with_capacity(influence.param_count());
    scorer.gradient_into(&grads, &mut flat);
    Ok((tape.scalar(loss), flat))
}
