mod common;

use std::collections::HashSet;

use common::chain;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqd_core::qsim::{expected_missing_fraction, expected_unique};
use sqd_core::sci::{self, DeterminantBasis};

#[test]
fn expected_unique_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw: Vec<f64> = (0..100).map(|_| rng.random::<f64>().powi(3)).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let dist = WeightedIndex::new(&probs).unwrap();
    let shots = 50;
    let trials = 10_000;
    let mut sum = 0usize;
    for _ in 0..trials {
        let seen: HashSet<usize> = (0..shots).map(|_| dist.sample(&mut rng)).collect();
        sum += seen.len();
    }
    let mc = sum as f64 / trials as f64;
    let closed = expected_unique(&probs, shots as f64);
    assert!(((mc - closed) / closed).abs() < 0.02, "MC {mc} vs closed form {closed}");
}

#[test]
fn expected_missing_fraction_matches_ideal_sampling_on_l2() {
    let ham = chain(2);
    let g = sci::fci_ground_state(&ham, 3, 3).unwrap();
    let w: Vec<f64> = g.vector.iter().map(|c| c * c).collect();
    let dist = WeightedIndex::new(&w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for shots in [2usize, 5, 20] {
        let trials = 200;
        let fs: Vec<f64> = (0..trials)
            .map(|_| {
                let dets: Vec<_> = (0..shots).map(|_| g.basis.dets()[dist.sample(&mut rng)]).collect();
                let basis = DeterminantBasis::new(4, 3, 3, dets).unwrap();
                sci::missing_fraction(&g, &basis).unwrap()
            })
            .collect();
        let mean = fs.iter().sum::<f64>() / trials as f64;
        let var = fs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let sigma = (var / trials as f64).sqrt();
        let closed = expected_missing_fraction(&w, &w, shots as f64);
        assert!((mean - closed).abs() < 3.0 * sigma.max(1e-12), "S={shots}: MC {mean} ± {sigma} vs {closed}");
    }
}
