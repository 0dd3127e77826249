use std::collections::BTreeSet;

use super::idss::InfectionForest;
use super::mobility::MobilityMatrix;
use crate::error::{Error, Result};
use crate::graph::{DiffusionObservation, Graph, PropagationForest, SeedVector};
use crate::numeric::DenseMatrix;

/// County-level learning instance derived from an individual forest.
#[derive(Debug, Clone, PartialEq)]
pub struct CountyInstance {
    pub graph: Graph,
    pub s: SeedVector,
    pub y: DiffusionObservation,
    /// Steps are first infection days.
    pub forest: PropagationForest,
}

/// Per-county features: population and off-diagonal out-flow (both scaled
/// by their maximum), stay-home share, and planar coordinates.
fn county_features(flows: &MobilityMatrix, populations: &[u64]) -> Result<DenseMatrix> {
    let n = flows.n_counties();
    let max_pop = populations.iter().copied().max().unwrap_or(1).max(1) as f64;
    let away: Vec<f64> =
        (0..n).map(|a| flows.out_flows(a).iter().enumerate().filter(|&(b, _)| b != a).map(|(_, f)| f).sum()).collect();
    let max_away = away.iter().copied().fold(0.0, f64::max);
    let mut rows = Vec::with_capacity(n);
    for a in 0..n {
        let total: f64 = flows.out_flows(a).iter().sum();
        let [x, y] = flows.coords().map_or([0.0, 0.0], |c| c[a]);
        rows.push(vec![
            populations[a] as f64 / max_pop,
            if max_away > 0.0 { away[a] / max_away } else { 0.0 },
            flows.flow(a, a) / total,
            x,
            y,
        ]);
    }
    DenseMatrix::from_rows(&rows)
}

/// Collapses an individual forest onto counties.
///
/// An infected non-source county's parent is the county of whoever infected
/// its earliest case (ties to the smaller individual id). Edges are all
/// positive-flow pairs plus any realised cross-county transmission, so the
/// county forest always lies inside the graph.
pub fn forest_to_county_instance(
    forest: &InfectionForest,
    flows: &MobilityMatrix,
    populations: &[u64],
) -> Result<CountyInstance> {
    let n = flows.n_counties();
    if populations.len() != n {
        return Err(Error::shape("one population per county is required"));
    }
    if forest.individuals.iter().any(|i| i.county >= n) {
        return Err(Error::shape("individual county out of range"));
    }
    let mut first: Vec<Option<usize>> = vec![None; n];
    let mut seeds = vec![false; n];
    for ind in &forest.individuals {
        let c = ind.county;
        if ind.parent.is_none() {
            seeds[c] = true;
        }
        let earlier = first[c].is_none_or(|f| {
            let fi = &forest.individuals[f];
            (ind.infected_day, ind.id) < (fi.infected_day, fi.id)
        });
        if earlier {
            first[c] = Some(ind.id);
        }
    }
    let mut out = PropagationForest::empty(n);
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && flows.flow(a, b) > 0.0 {
                pairs.insert((a, b));
            }
        }
    }
    for c in 0..n {
        let Some(f) = first[c] else { continue };
        let ind = &forest.individuals[f];
        out.step[c] = Some(if seeds[c] { 0 } else { ind.infected_day });
        if seeds[c] {
            continue;
        }
        let p = ind.parent.ok_or_else(|| Error::Contract("non-root case without parent".into()))?;
        let pc = forest
            .individuals
            .get(p)
            .map(|i| i.county)
            .ok_or_else(|| Error::Contract(format!("individual {} has unknown parent {p}", ind.id)))?;
        out.parent[c] = Some(pc);
        pairs.insert((pc, c));
    }
    let y = DiffusionObservation::new(first.iter().map(Option::is_some).collect());
    let graph = Graph::new(n, pairs.into_iter().collect(), county_features(flows, populations)?)?;
    Ok(CountyInstance { graph, s: SeedVector::new(seeds), y, forest: out })
}
