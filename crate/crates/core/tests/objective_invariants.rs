//! Structural invariants every shipped objective family must satisfy.

use dogsim_core::objectives::{
    check_monotone_submodular, evaluate, marginal_gain, CoverageObjective, DetectionObjective,
    GaussianEmseObjective, Objective,
};
use dogsim_core::rng::rng_from_seed;
use rand::Rng;

fn families(seed: u64) -> Vec<(&'static str, Box<dyn Objective>)> {
    vec![
        (
            "coverage",
            Box::new(CoverageObjective::random_grid(9, 4, 0.3, seed)) as Box<dyn Objective>,
        ),
        ("detection", Box::new(DetectionObjective::random(9, 6, seed))),
        (
            "gaussian-one-factor",
            Box::new(GaussianEmseObjective::one_factor(9, seed).unwrap()),
        ),
        (
            "gaussian-equicorrelated",
            Box::new(GaussianEmseObjective::equicorrelated(9, 0.4).unwrap()),
        ),
    ]
}

#[test]
fn empty_set_zero_and_full_set_cap() {
    let mut rng = rng_from_seed(100);
    for seed in [1, 2, 3, 4, 5] {
        for (name, f) in families(seed) {
            let n = f.universe().len();
            assert_eq!(evaluate(f.as_ref(), &[]).unwrap(), 0.0, "{name}");
            let full: Vec<usize> = (0..n).collect();
            let top = evaluate(f.as_ref(), &full).unwrap();
            assert!(top <= 1.0 + 1e-12, "{name}: f(V) = {top}");
            for _ in 0..50 {
                let size = rng.random_range(0..=n);
                let mut set: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    set.swap(i, rng.random_range(0..=i));
                }
                set.truncate(size);
                let v = evaluate(f.as_ref(), &set).unwrap();
                assert!(
                    (0.0..=top + 1e-12).contains(&v),
                    "{name}: f({set:?}) = {v} above f(V) = {top}"
                );
            }
        }
    }
}

#[test]
fn diminishing_returns_thousand_triples_per_family() {
    // Random chains A ⊆ B, s ∉ B: the marginal gain on the subset dominates.
    let mut rng = rng_from_seed(2000);
    for (name, f) in families(7) {
        let n = f.universe().len();
        for trial in 0..1000 {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let b_size = rng.random_range(0..n); // leave room for s
            let a_size = rng.random_range(0..=b_size);
            let b = &perm[..b_size];
            let a = &b[..a_size];
            let s = perm[b_size];
            let gain_a = marginal_gain(f.as_ref(), a, s).unwrap();
            let gain_b = marginal_gain(f.as_ref(), b, s).unwrap();
            assert!(
                gain_a >= gain_b - 1e-9,
                "{name} trial {trial}: gain({a:?}, {s}) = {gain_a} < gain({b:?}, {s}) = {gain_b}"
            );
            assert!(gain_a >= -1e-12, "{name}: negative marginal");
        }
    }
}

#[test]
fn every_family_passes_exhaustive_check() {
    for seed in 0..5 {
        for (name, f) in families(seed) {
            let report = check_monotone_submodular(f.as_ref(), 10).unwrap();
            assert!(
                report.passed(),
                "{name} seed {seed}: monotone={} submodular={}",
                report.is_monotone,
                report.is_submodular
            );
        }
    }
}
