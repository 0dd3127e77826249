//! The trained parameter bundle shared by training, inference and the
//! checkpoint format.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::influence::{Influence, InfluenceNet};
use crate::prior::VaePrior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceKind {
    Learned,
    Cosine,
}

impl InfluenceKind {
    pub fn name(self) -> &'static str {
        match self {
            InfluenceKind::Learned => "learned",
            InfluenceKind::Cosine => "cosine",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub influence: Influence,
    pub prior: VaePrior,
    /// Average number of seeds per training sample; drives the top-k
    /// fallback of seed extraction.
    pub mean_seed_count: f64,
}

impl ModelState {
    pub fn init<R: Rng + ?Sized>(
        n_nodes: usize,
        feature_dim: usize,
        latent_dim: usize,
        kind: InfluenceKind,
        rng: &mut R,
    ) -> Self {
        let influence = match kind {
            InfluenceKind::Learned => Influence::Learned(InfluenceNet::new(feature_dim, rng)),
            InfluenceKind::Cosine => Influence::Cosine,
        };
        let prior = VaePrior::new(n_nodes, latent_dim, rng);
        Self { influence, prior, mean_seed_count: 0.0 }
    }

    pub fn kind(&self) -> InfluenceKind {
        match self.influence {
            Influence::Learned(_) => InfluenceKind::Learned,
            Influence::Cosine => InfluenceKind::Cosine,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.prior.n_nodes()
    }

    /// Feature width the influence net expects, if learned.
    pub fn feature_dim(&self) -> Option<usize> {
        match &self.influence {
            Influence::Learned(net) => Some(net.feature_dim()),
            Influence::Cosine => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.influence.param_count() + self.prior.param_count()
    }

    /// Influence parameters, then prior parameters.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.influence.flatten_into(&mut out);
        self.prior.flatten_into(&mut out);
        out
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape(format!("{} values for {} parameters", flat.len(), self.param_count())));
        }
        let used = self.influence.assign(flat)?;
        self.prior.assign(&flat[used..])?;
        Ok(())
    }

    /// Fails when the model was built for a different graph.
    pub fn check_graph(&self, graph: &Graph) -> Result<()> {
        if self.n_nodes() != graph.n_nodes() {
            return Err(Error::shape(format!(
                "model covers {} nodes but the graph has {}",
                self.n_nodes(),
                graph.n_nodes()
            )));
        }
        if let Some(f) = self.feature_dim() {
            if f != graph.feature_dim() {
                return Err(Error::shape(format!(
                    "model expects {f} features per node but the graph has {}",
                    graph.feature_dim()
                )));
            }
        }
        Ok(())
    }
}
