use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mobility::{MobilityMatrix, MobilitySampler};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdssConfig {
    pub n_counties: usize,
    pub populations: Vec<u64>,
    pub infectious_period_days: usize,
    pub daily_infection_prob: Vec<f64>,
    pub n_airport_counties: usize,
    pub n_initial_sources: usize,
    pub n_initial_infected: usize,
    pub horizon_days: usize,
    pub rng_seed: u64,
}

impl IdssConfig {
    /// Defaults with `n_counties` equal populations.
    pub fn uniform(n_counties: usize, population: u64) -> Self {
        Self {
            n_counties,
            populations: vec![population; n_counties],
            infectious_period_days: 6,
            daily_infection_prob: vec![0.2, 0.3, 0.3, 0.2, 0.1, 0.1],
            n_airport_counties: 72,
            n_initial_sources: 2,
            n_initial_infected: 10,
            horizon_days: 90,
            rng_seed: 0,
        }
    }

    /// Expected secondary infections per case.
    pub fn r0(&self) -> f64 {
        self.daily_infection_prob.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.populations.len() != self.n_counties {
            return Err(Error::Usage(format!(
                "populations lists {} counties, n_counties is {}",
                self.populations.len(),
                self.n_counties
            )));
        }
        if self.populations.contains(&0) {
            return Err(Error::Usage("populations must be positive".into()));
        }
        if self.daily_infection_prob.len() != self.infectious_period_days {
            return Err(Error::Usage("daily_infection_prob needs one entry per infectious day".into()));
        }
        if self.daily_infection_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Usage("daily_infection_prob entries must lie in [0, 1]".into()));
        }
        if self.n_counties > 0 && self.n_initial_sources == 0 && self.n_initial_infected > 0 {
            return Err(Error::Usage("initial infections need at least one source county".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: usize,
    pub county: usize,
    pub infected_day: u32,
    /// `None` when recovery falls beyond the horizon.
    pub recovered_day: Option<u32>,
    pub parent: Option<usize>,
}

/// Every infected individual, indexed by id, in infection order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InfectionForest {
    pub individuals: Vec<Individual>,
}

impl InfectionForest {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Number of direct children of each individual.
    pub fn offspring_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.len()];
        for ind in &self.individuals {
            if let Some(p) = ind.parent {
                counts[p] += 1;
            }
        }
        counts
    }
}

/// `days[d][c] = (S, I, R)` of county `c` at the start of day `d`, after
/// that day's recoveries and arrivals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SirSeries {
    pub days: Vec<Vec<[u64; 3]>>,
}

impl SirSeries {
    /// Delimited text: `day,county,s,i,r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("day,county,s,i,r\n");
        for (d, row) in self.days.iter().enumerate() {
            for (c, [s, i, r]) in row.iter().enumerate() {
                out.push_str(&format!("{d},{c},{s},{i},{r}\n"));
            }
        }
        out
    }
}

/// Counties with the largest populations, ties to smaller id.
fn airport_pool(populations: &[u64], size: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..populations.len()).collect();
    order.sort_by(|&a, &b| populations[b].cmp(&populations[a]).then(a.cmp(&b)));
    order.truncate(size.max(1).min(populations.len()));
    order
}

/// Spatial SIR with mobility-driven cross-county transmission.
///
/// On day `d` every infectious individual of age `a = d - infected_day`
/// makes one attempt with probability `P[a]`; the target county comes from
/// [`MobilitySampler::secondary`] and the target is one of its remaining
/// susceptibles. New cases become infectious the next day; recovery comes
/// `n` days after infection.
pub fn simulate_idss(config: &IdssConfig, flows: &MobilityMatrix) -> Result<(InfectionForest, SirSeries)> {
    config.validate()?;
    let nc = config.n_counties;
    if flows.n_counties() != nc {
        return Err(Error::shape(format!("mobility covers {} counties, config has {nc}", flows.n_counties())));
    }
    let mut rng = stream_rng(config.rng_seed, Stream::Simulation);
    let sampler = MobilitySampler::new(flows);
    let period = config.infectious_period_days as u32;
    let horizon = config.horizon_days as u32;

    let mut susceptible: Vec<u64> = config.populations.clone();
    let mut infectious = vec![0u64; nc];
    let mut recovered = vec![0u64; nc];
    let mut pending = vec![0u64; nc];
    let mut forest = InfectionForest::default();

    let add_case = |forest: &mut InfectionForest, county: usize, day: u32, parent: Option<usize>| {
        let id = forest.individuals.len();
        let recovered_day = day.checked_add(period).filter(|&r| r < horizon);
        forest.individuals.push(Individual { id, county, infected_day: day, recovered_day, parent });
    };

    if nc > 0 && config.n_initial_infected > 0 && horizon > 0 {
        let pool = airport_pool(&config.populations, config.n_airport_counties);
        let k = config.n_initial_sources.min(pool.len());
        let mut picked: Vec<usize> = sample_indices(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
        picked.sort_unstable();
        let weights: Vec<f64> = (0..nc).map(|c| picked.iter().map(|&s| flows.flow(s, c)).sum()).collect();
        let arrival = WeightedIndex::new(&weights)
            .map_err(|_| Error::Sampling("source counties have no out-flow mass".into()))?;
        for _ in 0..config.n_initial_infected {
            let c = arrival.sample(&mut rng);
            if susceptible[c] > pending[c] {
                pending[c] += 1;
                add_case(&mut forest, c, 0, None);
            }
        }
    }

    let mut series = SirSeries::default();
    // ids of infectious individuals, ascending
    let mut active: Vec<usize> = Vec::new();
    let mut next_new = 0usize;
    for day in 0..horizon {
        // arrivals scheduled for today
        for c in 0..nc {
            susceptible[c] -= pending[c];
            infectious[c] += pending[c];
            pending[c] = 0;
        }
        while next_new < forest.len() && forest.individuals[next_new].infected_day == day {
            active.push(next_new);
            next_new += 1;
        }
        // recoveries due today
        active.retain(|&id| {
            let ind = &forest.individuals[id];
            if day - ind.infected_day >= period {
                infectious[ind.county] -= 1;
                recovered[ind.county] += 1;
                false
            } else {
                true
            }
        });
        series.days.push((0..nc).map(|c| [susceptible[c], infectious[c], recovered[c]]).collect());
        if day + 1 >= horizon {
            break;
        }
        for idx in 0..active.len() {
            let id = active[idx];
            let (county, age) = {
                let ind = &forest.individuals[id];
                (ind.county, (day - ind.infected_day) as usize)
            };
            if !rng.random_bool(config.daily_infection_prob[age]) {
                continue;
            }
            let target = sampler.secondary(county, &mut rng)?;
            if susceptible[target] > pending[target] {
                pending[target] += 1;
                add_case(&mut forest, target, day + 1, Some(id));
            }
        }
    }
    Ok((forest, series))
}
