//! Finite-difference checks of every analytic gradient on small random
//! instances.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, ObservedEdgeSet};
use crate::inference::{freeze_structure, objective_with_structure};
use crate::influence::{build_influence_matrix, diffusion_loss};
use crate::model::{InfluenceKind, ModelState};
use crate::numeric::{gradient_check_report, DenseMatrix};
use crate::prior::elbo;
use crate::rng::{item_rng, Stream};
use crate::sim::{simulate_si, SiConfig};
use crate::training::supervised_edge_loss;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub max_nodes: usize,
    pub perturbation: f64,
    pub tolerance: f64,
    pub inference_tolerance: f64,
    pub rng_seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            max_nodes: 8,
            perturbation: 1e-4,
            tolerance: 1e-4,
            inference_tolerance: 1e-3,
            rng_seed: 0,
        }
    }
}

impl GradcheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::Usage("gradcheck needs at least one instance".into()));
        }
        if self.max_nodes < 2 {
            return Err(Error::Usage("max_nodes must be at least 2".into()));
        }
        if !(self.perturbation > 0.0 && self.tolerance > 0.0 && self.inference_tolerance > 0.0) {
            return Err(Error::Usage("perturbation and tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Which analytic gradient to corrupt, for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    Diffusion,
    Elbo,
    Supervised,
    Inference,
}

impl LossName {
    pub const ALL: [LossName; 4] = [LossName::Diffusion, LossName::Elbo, LossName::Supervised, LossName::Inference];

    pub fn name(self) -> &'static str {
        match self {
            LossName::Diffusion => "diffusion",
            LossName::Elbo => "elbo",
            LossName::Supervised => "supervised",
            LossName::Inference => "inference",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCheck {
    pub loss: LossName,
    pub max_rel_error: f64,
    pub worst_instance: usize,
    pub tolerance: f64,
    pub checked: usize,
}

impl LossCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

struct Instance {
    graph: Graph,
    model: ModelState,
    y: crate::graph::DiffusionObservation,
    s: crate::graph::SeedVector,
    forest: crate::graph::PropagationForest,
    observed: ObservedEdgeSet,
    noise: Vec<f64>,
    z: Vec<f64>,
}

const FEATURES: usize = 3;
const LATENT: usize = 4;

fn instance(config: &GradcheckConfig, index: usize) -> Result<Instance> {
    let mut rng = item_rng(config.rng_seed, Stream::Simulation, index as u64);
    let n = rng.random_range(3..=config.max_nodes.max(3));
    let feats: Vec<f64> = (0..n * FEATURES).map(|_| rng.sample(StandardNormal)).collect();
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(0.5) {
                pairs.push((u, v));
            }
        }
    }
    let graph = Graph::from_undirected(n, &pairs, DenseMatrix::new(n, FEATURES, feats)?)?;
    let si = SiConfig { seed_fraction: 0.25, iterations: 3, beta: 0.5, rng_seed: rng.random() };
    let out = simulate_si(&graph, &si)?;
    let observed = ObservedEdgeSet::new(&graph, &out.y, out.forest.edges())?;
    let mut model = ModelState::init(n, FEATURES, LATENT, InfluenceKind::Learned, &mut rng);
    model.prior.z_bar = Some((0..LATENT).map(|_| rng.sample(StandardNormal)).collect());
    let noise = (0..LATENT).map(|_| rng.sample(StandardNormal)).collect();
    let z = (0..LATENT).map(|_| rng.sample(StandardNormal)).collect();
    Ok(Instance { graph, model, y: out.y, s: out.s, forest: out.forest, observed, noise, z })
}

fn check_one(inst: &Instance, loss: LossName, h: f64, corrupt: bool) -> Result<(f64, usize)> {
    let flip = |g: Vec<f64>| if corrupt { g.into_iter().map(|x| -x).collect() } else { g };
    let m = &inst.model;
    let report = match loss {
        LossName::Diffusion => {
            let (_, g) = diffusion_loss(&m.influence, &inst.graph, &inst.y, &inst.s, &inst.forest)?;
            let mut theta = Vec::new();
            m.influence.flatten_into(&mut theta);
            let mut f = |p: &[f64]| {
                let mut inf = m.influence.clone();
                inf.assign(p)?;
                Ok(diffusion_loss(&inf, &inst.graph, &inst.y, &inst.s, &inst.forest)?.0)
            };
            gradient_check_report(&mut f, &theta, &flip(g), h)?
        }
        LossName::Supervised => {
            let (_, g) = supervised_edge_loss(&m.influence, &inst.graph, &inst.observed)?;
            let mut theta = Vec::new();
            m.influence.flatten_into(&mut theta);
            let mut f = |p: &[f64]| {
                let mut inf = m.influence.clone();
                inf.assign(p)?;
                Ok(supervised_edge_loss(&inf, &inst.graph, &inst.observed)?.0)
            };
            gradient_check_report(&mut f, &theta, &flip(g), h)?
        }
        LossName::Elbo => {
            let (_, g) = elbo(&m.prior, &inst.s, &inst.noise)?;
            let mut theta = Vec::new();
            m.prior.flatten_into(&mut theta);
            let mut f = |p: &[f64]| {
                let mut pr = m.prior.clone();
                pr.assign(p)?;
                Ok(elbo(&pr, &inst.s, &inst.noise)?.0)
            };
            gradient_check_report(&mut f, &theta, &flip(g), h)?
        }
        LossName::Inference => {
            let matrix = build_influence_matrix(&m.influence, &inst.graph)?;
            let st = freeze_structure(m, &matrix, &inst.z, &inst.y, 0.5)?;
            let (_, g) = objective_with_structure(m, &inst.z, &inst.y, &st, 0.1)?;
            let mut f = |z: &[f64]| Ok(objective_with_structure(m, z, &inst.y, &st, 0.1)?.0);
            gradient_check_report(&mut f, &inst.z, &flip(g), h)?
        }
    };
    Ok((report.max_rel_error, report.checked))
}

/// Runs every loss over `config.instances` random instances of at most
/// `config.max_nodes` nodes. `corrupt` negates that loss's analytic gradient.
pub fn run_gradcheck(config: &GradcheckConfig, corrupt: Option<LossName>) -> Result<Vec<LossCheck>> {
    config.validate()?;
    let instances = (0..config.instances).map(|i| instance(config, i)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for loss in LossName::ALL {
        let tolerance = if loss == LossName::Inference { config.inference_tolerance } else { config.tolerance };
        let mut rec = LossCheck { loss, max_rel_error: 0.0, worst_instance: 0, tolerance, checked: 0 };
        for (idx, inst) in instances.iter().enumerate() {
            let (err, checked) = check_one(inst, loss, config.perturbation, corrupt == Some(loss))?;
            rec.checked += checked;
            if err > rec.max_rel_error {
                rec.max_rel_error = err;
                rec.worst_instance = idx;
            }
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_corruption_fails() {
        let cfg = GradcheckConfig { instances: 3, max_nodes: 5, ..GradcheckConfig::default() };
        let ok = run_gradcheck(&cfg, None).unwrap();
        assert_eq!(ok.len(), 4);
        for c in &ok {
            assert!(c.passed(), "{c:?}");
            assert!(c.checked > 0);
        }
        let bad = run_gradcheck(&cfg, Some(LossName::Diffusion)).unwrap();
        assert!(!bad[0].passed());
        assert!(bad[1..].iter().all(LossCheck::passed));
    }

    #[test]
    fn names_round_trip() {
        for l in LossName::ALL {
            assert_eq!(LossName::from_name(l.name()), Some(l));
        }
        assert!(GradcheckConfig { instances: 0, ..GradcheckConfig::default() }.validate().is_err());
    }
}
