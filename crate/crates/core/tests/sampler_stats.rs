//! Minibatch index sampling is uniform over the training set.

use neuvol::encoder::Sampler;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

fn histogram(n: usize, batch: usize, interval: u64, epochs: u64, seed: u64) -> Vec<u64> {
    let mut s = Sampler::new(n, batch, interval);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; n];
    let mut out = Vec::new();
    for e in 0..epochs {
        s.next(e, &mut rng, &mut out);
        assert_eq!(out.len(), batch.min(n));
        for &i in &out {
            counts[i as usize] += 1;
        }
    }
    counts
}

#[test]
fn uniform_with_replacement() {
    let p = chi_square_p(&histogram(97, 64, 1, 3000, 1));
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn working_subsets_are_uniform_over_many_redraws() {
    // Draws within one interval share a subset and are correlated, so only
    // the first index after each redraw enters the histogram.
    let (n, interval) = (101, 4);
    let mut s = Sampler::new(n, 32, interval);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts = vec![0u64; n];
    let mut out = Vec::new();
    for e in 0..40_000 * interval {
        s.next(e, &mut rng, &mut out);
        if e % interval == 0 {
            counts[out[0] as usize] += 1;
        }
    }
    let p = chi_square_p(&counts);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn full_batch_visits_every_index_once() {
    let counts = histogram(40, 64, 1, 10, 3);
    assert!(counts.iter().all(|&c| c == 10));
}

#[test]
fn a_biased_histogram_is_detected() {
    let mut counts = histogram(97, 64, 1, 3000, 4);
    counts[0] += 400;
    assert!(chi_square_p(&counts) < 1e-3);
}
