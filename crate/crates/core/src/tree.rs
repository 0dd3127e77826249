//! Masked infection-probability iteration and parent-argmax forest
//! extraction.
//!
//! Probabilities are pushed along the influence matrix in the (max, x)
//! semiring: a node's candidate is its best single-parent path probability
//! `max_j P_j * I(j, i)`. Only nodes whose candidate strictly increases are
//! updated; all others keep their previous value. With every influence
//! below one this is a Bellman-Ford relaxation on `-log I`, so the mask
//! empties after at most `|V| - 1` rounds.

use crate::error::{Error, Result};
use crate::graph::{DiffusionObservation, Graph, ObservedEdgeSet, PropagationForest, SeedVector};
use crate::influence::{build_influence_matrix, Influence, InfluenceMatrix};

/// Absolute tolerance of the strict-increase test.
pub const INCREASE_TOL: f64 = 1e-12;

/// Where a node's current probability came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Unreached,
    Seed,
    Via(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTrace {
    /// `prob[k]` is the probability vector after iteration `k`.
    pub prob: Vec<Vec<f64>>,
    /// `masks[k - 1]` is the update mask of iteration `k >= 1`.
    pub masks: Vec<Vec<bool>>,
    /// First iteration at which each node's probability was positive.
    pub activation_step: Vec<Option<usize>>,
    /// Provenance of each node's final probability.
    pub origin: Vec<Origin>,
    /// Iteration whose mask came out empty, if any.
    pub converged_at: Option<usize>,
    /// The iteration budget ran out with a nonzero mask.
    pub truncated: bool,
}

impl PropagationTrace {
    pub fn final_prob(&self) -> &[f64] {
        self.prob.last().expect("trace holds iteration 0")
    }

    pub fn n_nodes(&self) -> usize {
        self.origin.len()
    }

    /// Root (seed-origin node) and path coefficient for every reached node,
    /// such that `final_prob[i] == seed_prob[root] * coef` along the frozen
    /// provenance links.
    pub fn provenance(&self, matrix: &InfluenceMatrix) -> (Vec<Option<usize>>, Vec<f64>) {
        let n = self.n_nodes();
        let mut root: Vec<Option<Option<usize>>> = vec![None; n];
        let mut coef = vec![0.0; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut v = start;
            // walk up until a resolved node, a seed, or a dead end
            let (mut r, mut c) = loop {
                if let Some(r) = root[v] {
                    break (r, coef[v]);
                }
                match self.origin[v] {
                    Origin::Seed => break (Some(v), 1.0),
                    Origin::Unreached => break (None, 0.0),
                    Origin::Via(j) => {
                        if path.contains(&v) || path.len() > n {
                            break (None, 0.0);
                        }
                        path.push(v);
                        v = j;
                    }
                }
            };
            if root[v].is_none() {
                root[v] = Some(r);
                coef[v] = c;
            }
            while let Some(u) = path.pop() {
                if let Origin::Via(j) = self.origin[u] {
                    c *= matrix.get(j, u);
                }
                if r.is_none() {
                    c = 0.0;
                }
                root[u] = Some(r);
                coef[u] = c;
                r = root[u].unwrap();
            }
        }
        (root.into_iter().map(Option::flatten).collect(), coef)
    }
}

/// Runs the masked iteration from `seed_prob` for at most `max_iters` rounds.
pub fn propagate_masked(matrix: &InfluenceMatrix, seed_prob: &[f64], max_iters: usize) -> Result<PropagationTrace> {
    let n = matrix.n_nodes();
    if seed_prob.len() != n {
        return Err(Error::shape(format!("{} seed probabilities for {n} nodes", seed_prob.len())));
    }
    if let Some(v) = seed_prob.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Contract(format!("seed probability of node {v} outside [0, 1]")));
    }
    if max_iters == 0 {
        return Err(Error::Usage("max_iters must be at least 1".into()));
    }

    let best_push = |p: &[f64], i: usize| -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for &(j, w) in matrix.incoming(i) {
            let c = p[j] * w;
            if c > best.0 {
                best = (c, Some(j));
            }
        }
        best
    };

    let mut origin = vec![Origin::Unreached; n];
    let mut p0 = vec![0.0; n];
    for i in 0..n {
        let (push, via) = best_push(seed_prob, i);
        if seed_prob[i] > 0.0 && seed_prob[i] >= push {
            p0[i] = seed_prob[i];
            origin[i] = Origin::Seed;
        } else if let Some(j) = via {
            p0[i] = push;
            origin[i] = Origin::Via(j);
        }
    }
    let mut activation_step: Vec<Option<usize>> = p0.iter().map(|&p| (p > 0.0).then_some(0)).collect();
    let mut prob = vec![p0];
    let mut masks = Vec::new();
    let mut converged_at = None;

    for k in 1..=max_iters {
        let prev = prob.last().unwrap();
        let mut next = prev.clone();
        let mut mask = vec![false; n];
        for i in 0..n {
            let (cand, via) = best_push(prev, i);
            if cand > prev[i] + INCREASE_TOL {
                mask[i] = true;
                next[i] = cand;
                origin[i] = Origin::Via(via.expect("positive candidate has a source"));
                activation_step[i].get_or_insert(k);
            }
        }
        let any = mask.iter().any(|&m| m);
        masks.push(mask);
        if !any {
            converged_at = Some(k);
            break;
        }
        prob.push(next);
    }
    let truncated = converged_at.is_none();
    Ok(PropagationTrace { prob, masks, activation_step, origin, converged_at, truncated })
}

/// Picks, for every infected non-seed, the infected in-neighbour with the
/// largest influence among those activated strictly earlier. Seeds count as
/// activated before every non-seed; ties go to the smaller node id.
///
/// Forest activation steps are `0` for seeds and `trace step + 1` otherwise.
pub fn extract_forest(
    trace: &PropagationTrace,
    matrix: &InfluenceMatrix,
    graph: &Graph,
    y: &DiffusionObservation,
    s: &SeedVector,
) -> Result<PropagationForest> {
    extract_with(trace, matrix, graph, y, s, |_, _| true)
}

fn extract_with(
    trace: &PropagationTrace,
    matrix: &InfluenceMatrix,
    graph: &Graph,
    y: &DiffusionObservation,
    s: &SeedVector,
    allowed: impl Fn(usize, usize) -> bool,
) -> Result<PropagationForest> {
    let n = graph.n_nodes();
    if trace.n_nodes() != n || matrix.n_nodes() != n || y.len() != n {
        return Err(Error::shape("trace, matrix, graph and observation disagree on size"));
    }
    s.check_consistent(y)?;
    let rank = |v: usize| -> Option<u32> {
        if s.is_seed(v) {
            Some(0)
        } else {
            trace.activation_step[v].map(|k| k as u32 + 1)
        }
    };
    let mut forest = PropagationForest::empty(n);
    let mut orphans = Vec::new();
    for v in 0..n {
        if !y.is_infected(v) {
            continue;
        }
        let rv = rank(v);
        forest.step[v] = rv;
        if s.is_seed(v) {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        if let Some(rv) = rv {
            for &j in graph.in_neighbors(v) {
                if !y.is_infected(j) || !allowed(j, v) {
                    continue;
                }
                if rank(j).is_some_and(|rj| rj < rv) {
                    let w = matrix.get(j, v);
                    if best.is_none_or(|(_, bw)| w > bw) {
                        best = Some((j, w));
                    }
                }
            }
        }
        match best {
            Some((j, _)) => forest.parent[v] = Some(j),
            None => orphans.push(v),
        }
    }
    if !orphans.is_empty() {
        return Err(Error::Orphan(orphans));
    }
    Ok(forest)
}

/// Forest inference from a precomputed influence matrix.
///
/// Propagation runs on the infected subgraph only. Children of observed
/// edges keep their observed parent.
pub fn infer_tree_from_matrix(
    matrix: &InfluenceMatrix,
    graph: &Graph,
    y: &DiffusionObservation,
    s: &SeedVector,
    observed: Option<&ObservedEdgeSet>,
) -> Result<(PropagationForest, PropagationTrace)> {
    let n = graph.n_nodes();
    s.check_consistent(y)?;
    let mut forced: Vec<Option<usize>> = vec![None; n];
    if let Some(obs) = observed {
        for (p, c) in obs.iter() {
            if c < n {
                forced[c] = Some(p);
            }
        }
    }
    let allowed = |j: usize, i: usize| forced[i].is_none_or(|p| p == j);
    let infected = matrix.restricted(|j, i| y.is_infected(j) && y.is_infected(i) && allowed(j, i));
    let trace = propagate_masked(&infected, &s.to_f64(), n.max(1))?;
    let forest = extract_with(&trace, matrix, graph, y, s, allowed)?;
    Ok((forest, trace))
}

/// Builds the influence matrix, propagates from the seeds and extracts the
/// most probable forest.
pub fn infer_tree(
    influence: &Influence,
    graph: &Graph,
    y: &DiffusionObservation,
    s: &SeedVector,
) -> Result<(PropagationForest, PropagationTrace)> {
    let matrix = build_influence_matrix(influence, graph)?;
    infer_tree_from_matrix(&matrix, graph, y, s, None)
}
