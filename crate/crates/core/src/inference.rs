//! Test-time recovery of sources and forest: a latent code is optimised
//! with all parameters frozen, starting from the mean training posterior.
//!
//! Objective at `z`:
//! `BCE(s_hard; decode(z)) + 1/2 |y_hat - y|^2 + gamma |z - z_bar|^2`,
//! where `s_hard` is the thresholded, infection-masked decoder output and
//! `y_hat` is the converged masked-propagation vector seeded by
//! `decode(z)`. The seed set and the propagation provenance are treated as
//! constants when differentiating, and re-derived at every iterate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DiffusionObservation, Graph, PropagationForest, SeedVector};
use crate::influence::{build_influence_matrix, InfluenceMatrix};
use crate::model::ModelState;
use crate::numeric::{AdamState, Tape};
use crate::prior::record_bernoulli_loglik;
use crate::tree::{infer_tree_from_matrix, propagate_masked};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub gamma: f64,
    pub seed_threshold: f64,
    /// Recorded for replay; the objective itself is deterministic.
    pub rng_seed: u64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { iterations: 100, step_size: 0.05, gamma: 0.1, seed_threshold: 0.5, rng_seed: 0 }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Usage("iterations must be at least 1".into()));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Usage("step_size must be finite and nonnegative".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Usage("gamma must be finite and nonnegative".into()));
        }
        if !(self.seed_threshold > 0.0 && self.seed_threshold < 1.0) {
            return Err(Error::Usage("seed_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub z_hat: Vec<f64>,
    /// Decoder output masked by the observation.
    pub seed_prob: Vec<f64>,
    pub s_hat: SeedVector,
    pub forest: PropagationForest,
    /// `objective_trace[0]` is the value at the mean latent, entry `t` the
    /// value after `t` steps.
    pub objective_trace: Vec<f64>,
    pub y_hat: Vec<f64>,
}

impl InferenceResult {
    /// Running minimum of the objective trace.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.objective_trace
            .iter()
            .scan(f64::INFINITY, |best, &v| {
                *best = best.min(v);
                Some(*best)
            })
            .collect()
    }
}

/// Thresholds the infection-masked seed probabilities; if nothing passes,
/// takes the `k` most probable infected nodes instead (ties to smaller id).
pub fn hard_seeds(masked_prob: &[f64], y: &DiffusionObservation, threshold: f64, k: usize) -> SeedVector {
    let mut s: Vec<bool> = masked_prob.iter().enumerate().map(|(v, &p)| y.is_infected(v) && p >= threshold).collect();
    if !s.iter().any(|&b| b) {
        let mut order = y.infected_nodes();
        order.sort_by(|&a, &b| masked_prob[b].total_cmp(&masked_prob[a]).then(a.cmp(&b)));
        for v in order.into_iter().take(k) {
            s[v] = true;
        }
    }
    SeedVector::new(s)
}

/// Adds seeds until every infected node is reachable from a seed through
/// infected nodes: repeatedly the unreached infected node with the highest
/// seed probability (ties to smaller id) becomes a seed.
pub fn cover_infected(
    matrix: &InfluenceMatrix,
    y: &DiffusionObservation,
    s: &SeedVector,
    seed_prob: &[f64],
) -> SeedVector {
    let n = y.len();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for ((j, i), w) in matrix.entries() {
        if w > 0.0 && y.is_infected(j) && y.is_infected(i) {
            out[j].push(i);
        }
    }
    let mut seeds = s.as_slice().to_vec();
    let mut reached = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| seeds[v]).collect();
    loop {
        while let Some(v) = stack.pop() {
            if reached[v] {
                continue;
            }
            reached[v] = true;
            stack.extend(out[v].iter().copied().filter(|&c| !reached[c]));
        }
        let next = (0..n)
            .filter(|&v| y.is_infected(v) && !reached[v])
            .max_by(|&a, &b| seed_prob[a].total_cmp(&seed_prob[b]).then(b.cmp(&a)));
        match next {
            Some(v) => {
                seeds[v] = true;
                stack.push(v);
            }
            None => break,
        }
    }
    SeedVector::new(seeds)
}

/// The non-differentiable parts of the objective at one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenStructure {
    pub s_hard: SeedVector,
    /// Seed node whose probability each `y_hat` entry is proportional to.
    pub root: Vec<Option<usize>>,
    pub coef: Vec<f64>,
    pub y_hat: Vec<f64>,
}

fn top_k(model: &ModelState) -> usize {
    (model.mean_seed_count.round() as usize).max(1)
}

fn check_inputs(model: &ModelState, matrix: &InfluenceMatrix, y: &DiffusionObservation) -> Result<Vec<f64>> {
    let z_bar = model
        .prior
        .z_bar
        .clone()
        .ok_or_else(|| Error::Usage("model has no mean latent; retrain it with at least one epoch".into()))?;
    if y.len() != model.n_nodes() || matrix.n_nodes() != model.n_nodes() {
        return Err(Error::shape(format!("observation of {} nodes for a model over {}", y.len(), model.n_nodes())));
    }
    Ok(z_bar)
}

fn masked(p: &[f64], y: &DiffusionObservation) -> Vec<f64> {
    p.iter().enumerate().map(|(v, &x)| if y.is_infected(v) { x } else { 0.0 }).collect()
}

/// Derives hard seeds and propagation provenance at `z`.
pub fn freeze_structure(
    model: &ModelState,
    matrix: &InfluenceMatrix,
    z: &[f64],
    y: &DiffusionObservation,
    threshold: f64,
) -> Result<FrozenStructure> {
    let p = model.prior.decode(z)?;
    let s_hard = hard_seeds(&masked(&p, y), y, threshold, top_k(model));
    let trace = propagate_masked(matrix, &p, matrix.n_nodes().max(1))?;
    let (root, coef) = trace.provenance(matrix);
    Ok(FrozenStructure { s_hard, root, coef, y_hat: trace.final_prob().to_vec() })
}

/// Objective value and `z`-gradient with the structure held fixed.
pub fn objective_with_structure(
    model: &ModelState,
    z: &[f64],
    y: &DiffusionObservation,
    structure: &FrozenStructure,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    let z_bar = model
        .prior
        .z_bar
        .as_ref()
        .ok_or_else(|| Error::Usage("model has no mean latent; retrain it with at least one epoch".into()))?;
    if z.len() != z_bar.len() {
        return Err(Error::shape("latent has the wrong length"));
    }
    let mut tape = Tape::new();
    let vars = model.prior.register(&mut tape);
    let zv = tape.leaf(z.to_vec());
    let p = model.prior.record_decode(&mut tape, &vars, zv)?;
    let ll = record_bernoulli_loglik(&mut tape, p, &structure.s_hard.to_f64())?;
    let bce = tape.affine(ll, -1.0, 0.0);

    let y_hat = tape.gather(p, structure.root.clone(), structure.coef.clone())?;
    let target = tape.constant(y.to_f64());
    let diff = tape.sub(y_hat, target)?;
    let sq = tape.dot(diff, diff)?;
    let fit = tape.affine(sq, 0.5, 0.0);

    let zb = tape.constant(z_bar.clone());
    let dz = tape.sub(zv, zb)?;
    let dz2 = tape.dot(dz, dz)?;
    let prox = tape.affine(dz2, gamma, 0.0);

    let total = tape.sum_scalars(&[bce, fit, prox]);
    let grads = tape.backward(total, &[1.0])?;
    Ok((tape.scalar(total), grads.wrt(zv)))
}

/// Objective value and `z`-gradient at `z`, re-deriving the structure.
pub fn inference_objective(
    model: &ModelState,
    z: &[f64],
    y: &DiffusionObservation,
    graph: &Graph,
    config: &InferenceConfig,
) -> Result<(f64, Vec<f64>)> {
    model.check_graph(graph)?;
    let matrix = build_influence_matrix(&model.influence, graph)?;
    check_inputs(model, &matrix, y)?;
    let st = freeze_structure(model, &matrix, z, y, config.seed_threshold)?;
    objective_with_structure(model, z, y, &st, config.gamma)
}

/// Runs the latent optimisation and reads off sources and forest from the
/// best iterate.
pub fn optimize_latent(
    model: &ModelState,
    graph: &Graph,
    y: &DiffusionObservation,
    config: &InferenceConfig,
) -> Result<InferenceResult> {
    config.validate()?;
    model.check_graph(graph)?;
    let matrix = build_influence_matrix(&model.influence, graph)?;
    let z_bar = check_inputs(model, &matrix, y)?;

    let mut z = z_bar.clone();
    let mut adam = AdamState::new(z.len(), config.step_size);
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut best = (f64::INFINITY, z.clone());
    for t in 0..=config.iterations {
        let st = freeze_structure(model, &matrix, &z, y, config.seed_threshold)?;
        let (value, grad) = objective_with_structure(model, &z, y, &st, config.gamma)?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("inference objective non-finite at iteration {t}")));
        }
        trace.push(value);
        if value < best.0 {
            best = (value, z.clone());
        }
        if t < config.iterations {
            adam.step(&mut z, &grad).map_err(|e| Error::Numeric(format!("inference iteration {t}: {e}")))?;
        }
    }

    let z_hat = best.1;
    let p = model.prior.decode(&z_hat)?;
    let seed_prob = masked(&p, y);
    let s_hard = hard_seeds(&seed_prob, y, config.seed_threshold, top_k(model));
    let s_hat = cover_infected(&matrix, y, &s_hard, &seed_prob);
    let (forest, _) = infer_tree_from_matrix(&matrix, graph, y, &s_hat, None)?;
    let y_hat = propagate_masked(&matrix, &p, matrix.n_nodes().max(1))?.final_prob().to_vec();
    Ok(InferenceResult { z_hat, seed_prob, s_hat, forest, objective_trace: trace, y_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_forest;
    use crate::model::InfluenceKind;
    use crate::numeric::{gradient_check, DenseMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Graph, ModelState, DiffusionObservation) {
        let feats = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.5, 0.5],
            vec![0.0, 1.0],
            vec![-0.5, 0.5],
            vec![-1.0, 0.0],
            vec![0.2, -0.7],
        ])
        .unwrap();
        let g = Graph::from_undirected(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)], feats).unwrap();
        let mut m = ModelState::init(6, 2, 3, InfluenceKind::Learned, &mut ChaCha8Rng::seed_from_u64(5));
        m.prior.z_bar = Some(vec![0.2, -0.1, 0.4]);
        m.mean_seed_count = 1.0;
        let y = DiffusionObservation::new(vec![true, true, true, false, true, false]);
        (g, m, y)
    }

    #[test]
    fn proximity_vanishes_at_mean_and_dominates_for_large_gamma() {
        let (g, m, y) = setup();
        let z_bar = m.prior.z_bar.clone().unwrap();
        let c0 = InferenceConfig { gamma: 0.0, ..InferenceConfig::default() };
        let c1 = InferenceConfig { gamma: 5.0, ..InferenceConfig::default() };
        let a = inference_objective(&m, &z_bar, &y, &g, &c0).unwrap().0;
        let b = inference_objective(&m, &z_bar, &y, &g, &c1).unwrap().0;
        assert_eq!(a, b);

        let big = InferenceConfig { gamma: 1e6, step_size: 0.05, iterations: 30, ..InferenceConfig::default() };
        let r = optimize_latent(&m, &g, &y, &big).unwrap();
        for (a, b) in r.z_hat.iter().zip(&z_bar) {
            assert!((a - b).abs() < 1e-2);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_with_frozen_structure() {
        let (g, m, y) = setup();
        let matrix = build_influence_matrix(&m.influence, &g).unwrap();
        let z = vec![0.5, -0.3, 0.1];
        let st = freeze_structure(&m, &matrix, &z, &y, 0.5).unwrap();
        let (_, grad) = objective_with_structure(&m, &z, &y, &st, 0.3).unwrap();
        let err = gradient_check(|zz| Ok(objective_with_structure(&m, zz, &y, &st, 0.3)?.0), &z, &grad, 1e-5).unwrap();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn frozen_structure_reproduces_propagation() {
        let (g, m, y) = setup();
        let matrix = build_influence_matrix(&m.influence, &g).unwrap();
        let z = vec![0.5, -0.3, 0.1];
        let st = freeze_structure(&m, &matrix, &z, &y, 0.5).unwrap();
        let p = m.prior.decode(&z).unwrap();
        for i in 0..6 {
            let rebuilt = st.root[i].map_or(0.0, |r| p[r] * st.coef[i]);
            assert!((rebuilt - st.y_hat[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_step_equals_mean_evaluation() {
        let (g, m, y) = setup();
        let cfg = InferenceConfig { iterations: 1, step_size: 0.0, ..InferenceConfig::default() };
        let r = optimize_latent(&m, &g, &y, &cfg).unwrap();
        let z_bar = m.prior.z_bar.clone().unwrap();
        assert_eq!(r.z_hat, z_bar);
        let (v, _) = inference_objective(&m, &z_bar, &y, &g, &cfg).unwrap();
        assert_eq!(r.objective_trace, vec![v, v]);
    }

    #[test]
    fn result_is_consistent() {
        let (g, m, y) = setup();
        let r = optimize_latent(&m, &g, &y, &InferenceConfig::default()).unwrap();
        assert_eq!(r.objective_trace.len(), 101);
        assert!(r.objective_trace.iter().all(|v| v.is_finite()));
        let best = r.best_so_far();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.s_hat.nodes().iter().all(|&v| y.is_infected(v)));
        assert!(r.s_hat.count() >= 1);
        assert!(validate_forest(&r.forest, &g, &y, &r.s_hat).is_empty());
    }

    #[test]
    fn missing_mean_latent_is_a_usage_error() {
        let (g, mut m, y) = setup();
        m.prior.z_bar = None;
        let err = optimize_latent(&m, &g, &y, &InferenceConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Usage(msg) if msg.contains("retrain")));
    }

    #[test]
    fn hard_seed_fallback() {
        let y = DiffusionObservation::new(vec![true, false, true, true]);
        let s = hard_seeds(&[0.2, 0.0, 0.3, 0.3], &y, 0.5, 2);
        assert_eq!(s.nodes(), vec![2, 3]);
        let s = hard_seeds(&[0.7, 0.0, 0.3, 0.6], &y, 0.5, 1);
        assert_eq!(s.nodes(), vec![0, 3]);
    }

    #[test]
    fn coverage_adds_one_seed_per_unreached_component() {
        let m = InfluenceMatrix::new(5, [((0, 1), 0.5), ((2, 3), 0.5), ((3, 2), 0.5)]);
        let y = DiffusionObservation::new(vec![true, true, true, true, false]);
        let s = SeedVector::from_nodes(5, &[0]);
        let out = cover_infected(&m, &y, &s, &[0.9, 0.1, 0.2, 0.4, 0.0]);
        assert_eq!(out.nodes(), vec![0, 3]);
    }
}
