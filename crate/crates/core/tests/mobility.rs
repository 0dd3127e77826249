//! Empirical county sampling against the two-step mixture computed by hand.

use dipt::sim::{sample_secondary_county, synth_mobility, MobilityMatrix, MobilitySampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn expected(m: &MobilityMatrix, a: usize) -> Vec<f64> {
    let n = m.n_counties();
    let row: f64 = m.out_flows(a).iter().sum();
    let mut p = vec![0.0; n];
    for x in 0..n {
        let px = m.flow(a, x) / row;
        let col: f64 = (0..n).map(|b| m.flow(b, x)).sum();
        for (b, pb) in p.iter_mut().enumerate() {
            *pb += px * m.flow(b, x) / col;
        }
    }
    p
}

fn within_three_sigma(counts: &[usize], p: &[f64], draws: usize) {
    for (b, (&c, &pb)) in counts.iter().zip(p).enumerate() {
        let sd = (draws as f64 * pb * (1.0 - pb)).sqrt();
        let diff = (c as f64 - draws as f64 * pb).abs();
        assert!(diff <= 3.0 * sd.max(1.0), "county {b}: {c} draws, expected {:.1} (sd {sd:.1})", draws as f64 * pb);
    }
}

#[test]
fn secondary_county_matches_mixture() {
    let pops = [500, 3000, 800, 12000, 150, 4000];
    let m = synth_mobility(6, &pops, 21).unwrap();
    let draws = 60_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for a in [0, 3, 4] {
        let p = expected(&m, a);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut counts = vec![0; 6];
        for _ in 0..draws {
            counts[sample_secondary_county(a, &m, &mut rng).unwrap()] += 1;
        }
        within_three_sigma(&counts, &p, draws);
    }
}

#[test]
fn cached_sampler_matches_mixture() {
    let m = MobilityMatrix::new(3, vec![4.0, 1.0, 0.0, 2.0, 2.0, 6.0, 0.0, 3.0, 1.0]).unwrap();
    let sampler = MobilitySampler::new(&m);
    let draws = 40_000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for a in 0..3 {
        let mut counts = vec![0; 3];
        for _ in 0..draws {
            counts[sampler.secondary(a, &mut rng).unwrap()] += 1;
        }
        within_three_sigma(&counts, &expected(&m, a), draws);
    }
}
