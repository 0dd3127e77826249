//! Named random sub-streams derived from a single run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent consumers of randomness within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Simulation,
    Init,
    Training,
    Inference,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Simulation => 1,
            Stream::Init => 2,
            Stream::Training => 3,
            Stream::Inference => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::Simulation => "simulation",
            Stream::Init => "init",
            Stream::Training => "training",
            Stream::Inference => "inference",
        }
    }
}

/// SplitMix64 finaliser.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of `stream` under `run_seed`.
pub fn stream_seed(run_seed: u64, stream: Stream) -> u64 {
    mix64(run_seed ^ mix64(stream.id()))
}

pub fn stream_rng(run_seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(run_seed, stream))
}

/// Generator for the `index`-th independent item of a stream, e.g. one
/// simulated instance.
pub fn item_rng(run_seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(stream_seed(run_seed, stream) ^ mix64(index.wrapping_add(0x51))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream_rng(7, Stream::Init).random();
        let b: u64 = stream_rng(7, Stream::Training).random();
        let c: u64 = stream_rng(7, Stream::Init).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
        let x: u64 = item_rng(7, Stream::Simulation, 0).random();
        let y: u64 = item_rng(7, Stream::Simulation, 1).random();
        assert_ne!(x, y);
    }
}
