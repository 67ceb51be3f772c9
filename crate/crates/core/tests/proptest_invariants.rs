//! Property tests for the sampling and objective layers.

use dogsim_core::objectives::GaussianEmseObjective;
use dogsim_core::rng::{pick_proportional, rng_from_seed};
use dogsim_core::sampling::{pms_protocol, poisson_inverse_cdf};
use proptest::prelude::*;

/// Independent oracle: cumulative Poisson pmf, term by term.
fn poisson_cdf_oracle(lambda: f64, x: u64) -> f64 {
    let mut pmf = (-lambda).exp();
    let mut cum = pmf;
    for k in 1..=x {
        pmf *= lambda / k as f64;
        cum += pmf;
    }
    cum
}

proptest! {
    /// The inversion returns the minimal x with CDF(x) >= r.
    #[test]
    fn poisson_inversion_is_minimal(lambda in 1e-3..64.0f64, r in 0.0..1.0f64) {
        prop_assume!(r < 1.0);
        let y = poisson_inverse_cdf(lambda, r).unwrap();
        prop_assert!(poisson_cdf_oracle(lambda, y) >= r);
        if y > 0 {
            prop_assert!(poisson_cdf_oracle(lambda, y - 1) < r);
        }
    }

    /// Monotone nondecreasing in the uniform draw.
    #[test]
    fn poisson_inversion_monotone_in_r(lambda in 1e-3..64.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let y_lo = poisson_inverse_cdf(lambda, lo).unwrap();
        let y_hi = poisson_inverse_cdf(lambda, hi).unwrap();
        prop_assert!(y_lo <= y_hi);
    }

    /// The proportional pick always lands on an index with positive mass.
    #[test]
    fn proportional_pick_hits_positive_mass(
        weights in prop::collection::vec(0.0..10.0f64, 1..12),
        r in 0.0..1.0f64,
    ) {
        match pick_proportional(&weights, r) {
            Some(idx) => prop_assert!(weights[idx] > 0.0),
            None => prop_assert!(weights.iter().all(|&w| w == 0.0)),
        }
    }

    /// The selected sensor is always one of the activated sensors, and at
    /// most one sensor is ever selected.
    #[test]
    fn pms_selects_from_activated(seed in 0u64..5000, alpha in 0.1..4.0f64) {
        let p = [0.1, 0.2, 0.3, 0.4];
        let mut rng = rng_from_seed(seed);
        let out = pms_protocol(&p, alpha, &mut rng).unwrap();
        if let Some(v) = out.selected {
            prop_assert!(out.activated.iter().any(|a| a.id == v));
        }
        prop_assert_eq!(out.messages, out.activations());
    }

    /// EMSE reduction is invariant under simultaneous symmetric permutation
    /// of the covariance and the observed set.
    #[test]
    fn emse_reduction_permutation_invariant(seed in 0u64..2000, swap_a in 0usize..5, swap_b in 0usize..5) {
        let n = 5;
        let f = GaussianEmseObjective::one_factor(n, seed).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(swap_a.min(n - 1), swap_b.min(n - 1));

        let cov: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| f.covariance(perm[i], perm[j])).collect())
            .collect();
        let g = GaussianEmseObjective::new(cov, f.jitter()).unwrap();

        let set = [0usize, 2];
        let mut image: Vec<usize> = set.iter().map(|&i| perm[i]).collect();
        image.sort_unstable();
        let direct = f.emse_reduction(&image).unwrap();
        let permuted = g.emse_reduction(&set).unwrap();
        prop_assert!((direct - permuted).abs() < 1e-9);
    }
}
