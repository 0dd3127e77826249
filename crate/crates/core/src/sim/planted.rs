use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numeric::{dot, sigmoid, DenseMatrix};

/// Transmission probability `sigmoid(a . x_parent + b . x_child + c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedLogistic {
    pub parent_weights: Vec<f64>,
    pub child_weights: Vec<f64>,
    pub bias: f64,
}

impl PlantedLogistic {
    /// Parent's first feature raises, child's second feature lowers the
    /// probability.
    pub fn standard(feature_dim: usize) -> Self {
        let mut a = vec![0.0; feature_dim];
        let mut b = vec![0.0; feature_dim];
        if feature_dim > 0 {
            a[0] = 2.5;
        }
        if feature_dim > 1 {
            b[1] = -2.5;
        }
        Self { parent_weights: a, child_weights: b, bias: -1.5 }
    }

    pub fn prob(&self, parent: &[f64], child: &[f64]) -> f64 {
        sigmoid(dot(&self.parent_weights, parent) + dot(&self.child_weights, child) + self.bias)
    }

    pub fn check(&self, graph: &Graph) -> Result<()> {
        let f = graph.feature_dim();
        if self.parent_weights.len() != f || self.child_weights.len() != f {
            return Err(Error::shape("planted weights differ from the feature width"));
        }
        Ok(())
    }
}

/// Undirected Erdos-Renyi graph with standard-normal node features and the
/// given expected degree.
pub fn random_feature_graph<R: Rng + ?Sized>(
    n: usize,
    feature_dim: usize,
    mean_degree: f64,
    rng: &mut R,
) -> Result<Graph> {
    let features: Vec<f64> = (0..n * feature_dim).map(|_| rng.sample(StandardNormal)).collect();
    let p = if n > 1 { (mean_degree / (n - 1) as f64).clamp(0.0, 1.0) } else { 0.0 };
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_undirected(n, &edges, DenseMatrix::new(n, feature_dim, features)?)
}
