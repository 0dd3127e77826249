//! Graph, observation, seed and forest data model.

mod io;

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

pub use io::{
    load_forest, load_graph, load_observation, load_scores, load_seeds, parse_forest, parse_graph, parse_observation,
    parse_scores, parse_seeds, write_forest, write_graph, write_observation, write_scores, write_seeds,
};

/// Directed graph with per-node features. Edge `(u, v)` lets `u` influence `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: DenseMatrix,
    in_nbrs: Vec<Vec<usize>>,
    out_nbrs: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>, features: DenseMatrix) -> Result<Self> {
        if features.rows() != n_nodes {
            return Err(Error::Contract(format!("{} feature rows for {n_nodes} nodes", features.rows())));
        }
        let mut edges = edges;
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Contract(format!("duplicate edge {:?}", w[0])));
            }
        }
        let mut in_nbrs = vec![Vec::new(); n_nodes];
        let mut out_nbrs = vec![Vec::new(); n_nodes];
        for &(u, v) in &edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::Contract(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::Contract(format!("self-loop on node {u}")));
            }
            out_nbrs[u].push(v);
            in_nbrs[v].push(u);
        }
        for list in &mut in_nbrs {
            list.sort_unstable();
        }
        Ok(Self { n_nodes, edges, features, in_nbrs, out_nbrs })
    }

    /// Each unordered pair becomes two directed edges.
    pub fn from_undirected(n_nodes: usize, pairs: &[(usize, usize)], features: DenseMatrix) -> Result<Self> {
        let edges = pairs.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).collect();
        Self::new(n_nodes, edges, features)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Sorted directed edges.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn feature(&self, v: usize) -> &[f64] {
        self.features.row(v)
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Sources of edges into `v`, ascending.
    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_nbrs[v]
    }

    /// Targets of edges out of `u`, ascending.
    pub fn out_neighbors(&self, u: usize) -> &[usize] {
        &self.out_nbrs[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n_nodes && self.out_nbrs[u].binary_search(&v).is_ok()
    }
}

/// Binary infection snapshot `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffusionObservation {
    infected: Vec<bool>,
}

impl DiffusionObservation {
    pub fn new(infected: Vec<bool>) -> Self {
        Self { infected }
    }

    pub fn len(&self) -> usize {
        self.infected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infected.is_empty()
    }

    pub fn is_infected(&self, v: usize) -> bool {
        self.infected[v]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.infected
    }

    pub fn count(&self) -> usize {
        self.infected.iter().filter(|&&b| b).count()
    }

    pub fn infected_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.infected[v]).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.infected.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Binary source indicator `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedVector {
    seeds: Vec<bool>,
}

impl SeedVector {
    pub fn new(seeds: Vec<bool>) -> Self {
        Self { seeds }
    }

    pub fn from_nodes(n: usize, nodes: &[usize]) -> Self {
        let mut seeds = vec![false; n];
        for &v in nodes {
            seeds[v] = true;
        }
        Self { seeds }
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn is_seed(&self, v: usize) -> bool {
        self.seeds[v]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.seeds
    }

    pub fn count(&self) -> usize {
        self.seeds.iter().filter(|&&b| b).count()
    }

    pub fn nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.seeds[v]).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.seeds.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Every seed must be infected in `y`.
    pub fn check_consistent(&self, y: &DiffusionObservation) -> Result<()> {
        if self.len() != y.len() {
            return Err(Error::shape(format!("{} seed entries vs {} observation entries", self.len(), y.len())));
        }
        if let Some(v) = (0..self.len()).find(|&v| self.seeds[v] && !y.is_infected(v)) {
            return Err(Error::Contract(format!("seed {v} is not infected")));
        }
        Ok(())
    }
}

/// Who-infected-whom forest: optional parent and activation step per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationForest {
    pub parent: Vec<Option<usize>>,
    pub step: Vec<Option<u32>>,
}

impl PropagationForest {
    pub fn empty(n: usize) -> Self {
        Self { parent: vec![None; n], step: vec![None; n] }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// `(parent, child)` pairs, ordered by child.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parent.iter().enumerate().filter_map(|(c, p)| p.map(|p| (p, c))).collect()
    }
}

/// Known infector -> infected pairs used as supervision.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservedEdgeSet {
    edges: BTreeSet<(usize, usize)>,
}

impl ObservedEdgeSet {
    pub fn new(
        graph: &Graph,
        y: &DiffusionObservation,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let edges: BTreeSet<_> = edges.into_iter().collect();
        for &(u, v) in &edges {
            if !graph.has_edge(u, v) {
                return Err(Error::Contract(format!("observed edge ({u}, {v}) not in graph")));
            }
            if !y.is_infected(u) || !y.is_infected(v) {
                return Err(Error::Contract(format!("observed edge ({u}, {v}) has an uninfected endpoint")));
            }
        }
        Ok(Self { edges })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Observed parent of `child`, if any.
    pub fn parent_of(&self, child: usize) -> Option<usize> {
        self.edges.iter().find(|&&(_, c)| c == child).map(|&(p, _)| p)
    }
}

/// A broken forest invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    LengthMismatch { forest: usize, nodes: usize },
    SeedNotInfected(usize),
    SeedHasParent(usize),
    SeedStepNotZero(usize),
    UncoveredInfected(usize),
    ParentNotNeighbor { parent: usize, child: usize },
    ParentNotInfected { parent: usize, child: usize },
    StepOrder { parent: usize, child: usize },
    MissingStep(usize),
    UninfectedAnnotated(usize),
    Cycle(usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { forest, nodes } => {
                write!(f, "forest covers {forest} nodes but graph has {nodes}")
            }
            Violation::SeedNotInfected(v) => write!(f, "seed {v} is not infected"),
            Violation::SeedHasParent(v) => write!(f, "seed {v} has a parent"),
            Violation::SeedStepNotZero(v) => write!(f, "seed {v} has nonzero activation step"),
            Violation::UncoveredInfected(v) => write!(f, "uncovered infected node {v}"),
            Violation::ParentNotNeighbor { parent, child } => {
                write!(f, "parent {parent} of {child} is not an in-neighbor")
            }
            Violation::ParentNotInfected { parent, child } => {
                write!(f, "parent {parent} of {child} is not infected")
            }
            Violation::StepOrder { parent, child } => {
                write!(f, "parent {parent} is not activated before child {child}")
            }
            Violation::MissingStep(v) => write!(f, "infected node {v} has no activation step"),
            Violation::UninfectedAnnotated(v) => {
                write!(f, "uninfected node {v} has a parent or step")
            }
            Violation::Cycle(v) => write!(f, "cycle through node {v}"),
        }
    }
}

/// Checks every forest invariant and returns all violations found.
pub fn validate_forest(
    forest: &PropagationForest,
    graph: &Graph,
    y: &DiffusionObservation,
    s: &SeedVector,
) -> Vec<Violation> {
    let n = graph.n_nodes();
    if forest.parent.len() != n || forest.step.len() != n || y.len() != n || s.len() != n {
        return vec![Violation::LengthMismatch { forest: forest.parent.len(), nodes: n }];
    }
    let mut out = Vec::new();
    for v in 0..n {
        let parent = forest.parent[v];
        let step = forest.step[v];
        if s.is_seed(v) {
            if !y.is_infected(v) {
                out.push(Violation::SeedNotInfected(v));
            }
            if parent.is_some() {
                out.push(Violation::SeedHasParent(v));
            }
            if step != Some(0) {
                out.push(Violation::SeedStepNotZero(v));
            }
            continue;
        }
        if !y.is_infected(v) {
            if parent.is_some() || step.is_some() {
                out.push(Violation::UninfectedAnnotated(v));
            }
            continue;
        }
        if step.is_none() {
            out.push(Violation::MissingStep(v));
        }
        let Some(p) = parent else {
            out.push(Violation::UncoveredInfected(v));
            continue;
        };
        if p >= n || !graph.has_edge(p, v) {
            out.push(Violation::ParentNotNeighbor { parent: p, child: v });
            continue;
        }
        if !y.is_infected(p) {
            out.push(Violation::ParentNotInfected { parent: p, child: v });
        }
        match (forest.step[p], step) {
            (Some(sp), Some(sv)) if sp < sv => {}
            _ => out.push(Violation::StepOrder { parent: p, child: v }),
        }
    }
    // cycle detection over parent links: 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut v = start;
        loop {
            if state[v] == 2 {
                break;
            }
            if state[v] == 1 {
                out.push(Violation::Cycle(v));
                break;
            }
            state[v] = 1;
            path.push(v);
            match forest.parent[v] {
                Some(p) if p < n => v = p,
                _ => break,
            }
        }
        for u in path {
            state[u] = 2;
        }
    }
    out
}

/// `{ j : (j, i) in E and y_j = 1 }`, ascending.
pub fn infected_neighbors(graph: &Graph, y: &DiffusionObservation, i: usize) -> Vec<usize> {
    graph.in_neighbors(i).iter().copied().filter(|&j| y.is_infected(j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(n: usize) -> DenseMatrix {
        DenseMatrix::zeros(n, 1)
    }

    fn chain() -> (Graph, DiffusionObservation, SeedVector) {
        let g = Graph::from_undirected(3, &[(0, 1), (1, 2)], feats(3)).unwrap();
        (g, DiffusionObservation::new(vec![true; 3]), SeedVector::from_nodes(3, &[0]))
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::new(2, vec![(0, 0)], feats(2)).is_err());
        assert!(Graph::new(2, vec![(0, 1), (0, 1)], feats(2)).is_err());
        assert!(Graph::new(2, vec![(0, 2)], feats(2)).is_err());
        assert!(Graph::new(3, vec![], feats(2)).is_err());
    }

    #[test]
    fn valid_chain_forest() {
        let (g, y, s) = chain();
        let f = PropagationForest { parent: vec![None, Some(0), Some(1)], step: vec![Some(0), Some(1), Some(2)] };
        assert!(validate_forest(&f, &g, &y, &s).is_empty());
    }

    #[test]
    fn parent_cycle_reported() {
        let (g, y, s) = chain();
        let f = PropagationForest { parent: vec![None, Some(2), Some(1)], step: vec![Some(0), Some(1), Some(2)] };
        let v = validate_forest(&f, &g, &y, &s);
        assert!(v.iter().any(|x| matches!(x, Violation::Cycle(_))), "{v:?}");
        assert!(v.iter().any(|x| x.to_string().contains("cycle")));
    }

    #[test]
    fn uncovered_infected_reported() {
        let (g, y, s) = chain();
        let f = PropagationForest { parent: vec![None, Some(0), None], step: vec![Some(0), Some(1), Some(2)] };
        let v = validate_forest(&f, &g, &y, &s);
        assert_eq!(v, vec![Violation::UncoveredInfected(2)]);
        assert_eq!(v[0].to_string(), "uncovered infected node 2");
    }

    #[test]
    fn non_neighbor_and_step_order() {
        let (g, y, s) = chain();
        let f = PropagationForest { parent: vec![None, Some(0), Some(0)], step: vec![Some(0), Some(1), Some(2)] };
        assert_eq!(validate_forest(&f, &g, &y, &s), vec![Violation::ParentNotNeighbor { parent: 0, child: 2 }]);
        let f = PropagationForest { parent: vec![None, Some(0), Some(1)], step: vec![Some(0), Some(2), Some(2)] };
        assert_eq!(validate_forest(&f, &g, &y, &s), vec![Violation::StepOrder { parent: 1, child: 2 }]);
    }

    #[test]
    fn empty_forest_for_no_infection() {
        let g = Graph::new(3, vec![], feats(3)).unwrap();
        let y = DiffusionObservation::new(vec![false; 3]);
        let s = SeedVector::new(vec![false; 3]);
        assert!(validate_forest(&PropagationForest::empty(3), &g, &y, &s).is_empty());
    }

    #[test]
    fn infected_neighbor_sets() {
        // star: centre 0 with leaves 1..=3, plus isolated node 4
        let g = Graph::from_undirected(5, &[(0, 1), (0, 2), (0, 3)], feats(5)).unwrap();
        let all = DiffusionObservation::new(vec![true; 5]);
        assert_eq!(infected_neighbors(&g, &all, 0), vec![1, 2, 3]);
        assert!(infected_neighbors(&g, &all, 4).is_empty());
        let only_leaf = DiffusionObservation::new(vec![false, true, false, false, false]);
        assert!(infected_neighbors(&g, &only_leaf, 1).is_empty());
    }

    #[test]
    fn observed_edges_validated() {
        let (g, y, _) = chain();
        assert!(ObservedEdgeSet::new(&g, &y, [(0, 1)]).is_ok());
        assert!(ObservedEdgeSet::new(&g, &y, [(0, 2)]).is_err());
        let partial = DiffusionObservation::new(vec![true, true, false]);
        assert!(ObservedEdgeSet::new(&g, &partial, [(1, 2)]).is_err());
    }

    #[test]
    fn seed_consistency() {
        let y = DiffusionObservation::new(vec![true, false]);
        assert!(SeedVector::from_nodes(2, &[0]).check_consistent(&y).is_ok());
        assert!(SeedVector::from_nodes(2, &[1]).check_consistent(&y).is_err());
    }
}
