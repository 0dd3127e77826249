use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Softening added to squared distances so nearby counties stay finite.
const DISTANCE_SOFTENING: f64 = 0.01;
/// Scale of off-diagonal gravity flows relative to `pop_a * pop_b`.
const GRAVITY_SCALE: f64 = 1e-7;

/// Daily flows between counties; `flow(a, b)` individuals travel from `a`
/// to `b`. The diagonal holds people staying home.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMatrix {
    n: usize,
    flows: Vec<f64>,
    coords: Option<Vec<[f64; 2]>>,
}

impl MobilityMatrix {
    pub fn new(n: usize, flows: Vec<f64>) -> Result<Self> {
        if flows.len() != n * n {
            return Err(Error::shape(format!("{} flows for {n} counties", flows.len())));
        }
        if flows.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Contract("flows must be finite and nonnegative".into()));
        }
        if let Some(a) = (0..n).find(|&a| flows[a * n..(a + 1) * n].iter().all(|&f| f == 0.0)) {
            return Err(Error::Contract(format!("county {a} has no out-flow")));
        }
        Ok(Self { n, flows, coords: None })
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() != self.n {
            return Err(Error::shape("one coordinate pair per county is required"));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn n_counties(&self) -> usize {
        self.n
    }

    pub fn flow(&self, a: usize, b: usize) -> f64 {
        self.flows[a * self.n + b]
    }

    pub fn out_flows(&self, a: usize) -> &[f64] {
        &self.flows[a * self.n..(a + 1) * self.n]
    }

    pub fn in_flows(&self, b: usize) -> Vec<f64> {
        (0..self.n).map(|a| self.flow(a, b)).collect()
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }
}

/// Gravity-model flows between counties placed uniformly in the unit
/// square: `flow(a, b) = k * pop_a * pop_b / (d(a, b)^2 + 0.01)` off the
/// diagonal and `flow(a, a) = pop_a`. Coordinates depend only on the seed.
pub fn synth_mobility(n_counties: usize, populations: &[u64], rng_seed: u64) -> Result<MobilityMatrix> {
    if n_counties < 2 {
        return Err(Error::Usage("mobility needs at least two counties".into()));
    }
    if populations.len() != n_counties || populations.contains(&0) {
        return Err(Error::Usage("one positive population per county is required".into()));
    }
    let mut rng = stream_rng(rng_seed, Stream::Simulation);
    let coords: Vec<[f64; 2]> = (0..n_counties).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let n = n_counties;
    let mut flows = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let (pa, pb) = (populations[a] as f64, populations[b] as f64);
            flows[a * n + b] = if a == b {
                pa
            } else {
                let dx = coords[a][0] - coords[b][0];
                let dy = coords[a][1] - coords[b][1];
                GRAVITY_SCALE * pa * pb / (dx * dx + dy * dy + DISTANCE_SOFTENING)
            };
        }
    }
    MobilityMatrix::new(n, flows)?.with_coords(coords)
}

/// Precomputed weighted samplers over every row and column.
#[derive(Debug, Clone)]
pub struct MobilitySampler {
    rows: Vec<Option<WeightedIndex<f64>>>,
    cols: Vec<Option<WeightedIndex<f64>>>,
}

impl MobilitySampler {
    pub fn new(flows: &MobilityMatrix) -> Self {
        let n = flows.n_counties();
        let rows = (0..n).map(|a| WeightedIndex::new(flows.out_flows(a)).ok()).collect();
        let cols = (0..n).map(|b| WeightedIndex::new(flows.in_flows(b)).ok()).collect();
        Self { rows, cols }
    }

    /// County `X` by the out-flows of `source`, then `B` by the in-flows
    /// of `X`.
    pub fn secondary<R: Rng + ?Sized>(&self, source: usize, rng: &mut R) -> Result<usize> {
        let row = self
            .rows
            .get(source)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::Sampling(format!("county {source} has no out-flow mass")))?;
        let x = row.sample(rng);
        let col = self.cols[x].as_ref().ok_or_else(|| Error::Sampling(format!("county {x} has no in-flow mass")))?;
        Ok(col.sample(rng))
    }

    /// One county drawn by the out-flows of `source`.
    pub fn by_out_flows<R: Rng + ?Sized>(&self, source: usize, rng: &mut R) -> Result<usize> {
        self.rows
            .get(source)
            .and_then(Option::as_ref)
            .map(|w| w.sample(rng))
            .ok_or_else(|| Error::Sampling(format!("county {source} has no out-flow mass")))
    }
}

pub fn sample_secondary_county<R: Rng + ?Sized>(
    source_county: usize,
    flows: &MobilityMatrix,
    rng: &mut R,
) -> Result<usize> {
    if source_county >= flows.n_counties() {
        return Err(Error::Sampling(format!("county {source_county} out of range")));
    }
    let row = flows.out_flows(source_county);
    let x = WeightedIndex::new(row)
        .map_err(|_| Error::Sampling(format!("county {source_county} has no out-flow mass")))?
        .sample(rng);
    WeightedIndex::new(flows.in_flows(x))
        .map_err(|_| Error::Sampling(format!("county {x} has no in-flow mass")))
        .map(|w| w.sample(rng))
}
