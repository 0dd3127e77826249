use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::planted::{random_feature_graph, PlantedLogistic};
use super::si::{simulate_si_from, SiConfig, SiOutcome};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{item_rng, stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transmission {
    /// Every edge transmits with `beta`.
    Constant,
    /// `sigmoid(w * x_u[0] - w * x_v[0] + bias)`.
    Planted,
}

/// A graph and a batch of SI instances on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiBatch {
    pub nodes: usize,
    pub features: usize,
    pub mean_degree: f64,
    pub instances: usize,
    /// Sources per instance; 0 uses `ceil(seed_fraction * nodes)`.
    pub sources: usize,
    pub seed_fraction: f64,
    /// Sources are drawn from nodes `0..source_pool`; 0 means all nodes.
    pub source_pool: usize,
    pub iterations: usize,
    pub transmission: Transmission,
    pub beta: f64,
    pub planted_weight: f64,
    pub planted_bias: f64,
    pub rng_seed: u64,
}

impl Default for SiBatch {
    fn default() -> Self {
        Self {
            nodes: 50,
            features: 4,
            mean_degree: 6.0,
            instances: 10,
            sources: 0,
            seed_fraction: 0.1,
            source_pool: 0,
            iterations: 200,
            transmission: Transmission::Constant,
            beta: 0.1,
            planted_weight: 8.0,
            planted_bias: -2.0,
            rng_seed: 0,
        }
    }
}

impl SiBatch {
    /// 50-node graphs, 150 instances (50 for training, 100 held out), five
    /// sources from a fixed pool of ten, two spreading rounds.
    pub fn planted_suite(rng_seed: u64) -> Self {
        Self {
            mean_degree: 10.0,
            instances: 150,
            sources: 5,
            source_pool: 10,
            iterations: 2,
            transmission: Transmission::Planted,
            rng_seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::Usage("nodes must be positive".into()));
        }
        if !(self.mean_degree >= 0.0 && self.mean_degree.is_finite()) {
            return Err(Error::Usage("mean_degree must be nonnegative".into()));
        }
        if self.source_pool > self.nodes {
            return Err(Error::Usage("source_pool exceeds nodes".into()));
        }
        if self.sources > self.pool() {
            return Err(Error::Usage("more sources than the source pool holds".into()));
        }
        if self.transmission == Transmission::Planted && self.features == 0 {
            return Err(Error::Usage("planted transmission needs at least one feature".into()));
        }
        if !(self.planted_weight.is_finite() && self.planted_bias.is_finite()) {
            return Err(Error::Usage("planted weight and bias must be finite".into()));
        }
        self.si_config(0).validate()
    }

    fn pool(&self) -> usize {
        if self.source_pool == 0 {
            self.nodes
        } else {
            self.source_pool
        }
    }

    fn si_config(&self, rng_seed: u64) -> SiConfig {
        SiConfig { seed_fraction: self.seed_fraction, iterations: self.iterations, beta: self.beta, rng_seed }
    }

    pub fn planted_logistic(&self) -> PlantedLogistic {
        let mut a = vec![0.0; self.features];
        let mut b = vec![0.0; self.features];
        if self.features > 0 {
            a[0] = self.planted_weight;
            b[0] = -self.planted_weight;
        }
        PlantedLogistic { parent_weights: a, child_weights: b, bias: self.planted_bias }
    }

    pub fn generate_graph(&self) -> Result<Graph> {
        self.validate()?;
        let mut rng = stream_rng(self.rng_seed, Stream::Simulation);
        random_feature_graph(self.nodes, self.features, self.mean_degree, &mut rng)
    }

    /// Instance `index` on `graph`.
    pub fn generate_instance(&self, graph: &Graph, index: usize) -> Result<SiOutcome> {
        if graph.n_nodes() != self.nodes || graph.feature_dim() != self.features {
            return Err(Error::shape("graph does not match the batch"));
        }
        let mut rng = item_rng(self.rng_seed, Stream::Simulation, index as u64);
        let k = if self.sources > 0 {
            self.sources
        } else {
            ((self.seed_fraction * self.nodes as f64).ceil() as usize).clamp(1, self.pool())
        };
        let seeds = sample_indices(&mut rng, self.pool(), k).into_vec();
        let config = self.si_config(rng.random());
        match self.transmission {
            Transmission::Constant => {
                let beta = self.beta;
                simulate_si_from(graph, &seeds, &config, |_, _| beta)
            }
            Transmission::Planted => {
                let f = self.planted_logistic();
                simulate_si_from(graph, &seeds, &config, |u, v| f.prob(graph.feature(u), graph.feature(v)))
            }
        }
    }

    pub fn generate(&self) -> Result<(Graph, Vec<SiOutcome>)> {
        let graph = self.generate_graph()?;
        let out = (0..self.instances).map(|i| self.generate_instance(&graph, i)).collect::<Result<_>>()?;
        Ok((graph, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_forest;

    #[test]
    fn deterministic_and_valid() {
        let b = SiBatch { instances: 4, ..SiBatch::default() };
        let (g, a) = b.generate().unwrap();
        let (_, again) = b.generate().unwrap();
        assert_eq!(a, again);
        for o in &a {
            assert_eq!(o.s.count(), 5);
            assert!(validate_forest(&o.forest, &g, &o.y, &o.s).is_empty());
        }
    }

    #[test]
    fn pooled_sources_stay_in_pool() {
        let b = SiBatch { instances: 20, ..SiBatch::planted_suite(3) };
        let (g, out) = b.generate().unwrap();
        for o in &out {
            assert_eq!(o.s.count(), 5);
            assert!(o.s.nodes().iter().all(|&v| v < 10));
            assert!(validate_forest(&o.forest, &g, &o.y, &o.s).is_empty());
            assert!(o.forest.step.iter().flatten().all(|&t| t <= 2));
        }
    }

    #[test]
    fn planted_function_favours_contrast() {
        let f = SiBatch::planted_suite(0).planted_logistic();
        assert!(f.prob(&[1.0, 0.0, 0.0, 0.0], &[-1.0, 0.0, 0.0, 0.0]) > 0.99);
        assert!(f.prob(&[-1.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]) < 0.01);
        assert!(SiBatch { source_pool: 60, ..SiBatch::default() }.validate().is_err());
        assert!(SiBatch { sources: 11, source_pool: 10, ..SiBatch::default() }.validate().is_err());
    }
}
