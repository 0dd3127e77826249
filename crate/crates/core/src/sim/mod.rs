//! Ground-truth generators: SI diffusion on feature graphs and a spatial
//! SIR model over counties linked by mobility flows.

mod batch;
mod county;
mod idss;
mod mobility;
mod planted;
mod si;

pub use batch::{SiBatch, Transmission};
pub use county::{forest_to_county_instance, CountyInstance};
pub use idss::{simulate_idss, IdssConfig, Individual, InfectionForest, SirSeries};
pub use mobility::{sample_secondary_county, synth_mobility, MobilityMatrix, MobilitySampler};
pub use planted::{random_feature_graph, PlantedLogistic};
pub use si::{simulate_si, simulate_si_from, simulate_si_with, SiConfig, SiOutcome};
