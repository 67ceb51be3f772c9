//! The distributed samplers must select from exactly the distribution the
//! centralized bandit prescribes. With frozen weights, one stage of the
//! broadcast path (Poisson multinomial sampling rerun until selection) and of
//! the star path (lazy activation + server resolution, rerun until selection)
//! are both compared against the closed-form probabilities by chi-square.

use dogsim_core::bandit::Exp3State;
use dogsim_core::rng::{rng_from_seed, unit_draw};
use dogsim_core::sampling::{
    lazy_activation_decision, pms_until_selected, rho, server_resolve, ActivationReport,
    LazySensorView,
};
use dogsim_core::stats::chi_square_gof;

fn frozen_state(n: usize) -> Exp3State {
    // Uneven weights with a wide dynamic range.
    let weights: Vec<f64> = (0..n).map(|v| 1.0 + (v as f64) * 0.7 + ((v % 3) as f64) * 2.0).collect();
    Exp3State::with_weights(weights, 0.15, 0.1).unwrap()
}

#[test]
fn broadcast_path_matches_centralized_distribution() {
    let n = 8;
    let state = frozen_state(n);
    let p = state.probabilities();
    let trials = 100_000u64;
    let mut rng = rng_from_seed(4242);
    let mut counts = vec![0u64; n];
    for _ in 0..trials {
        let out = pms_until_selected(&p, 1.0, &mut rng).unwrap();
        counts[out.selected.unwrap()] += 1;
    }
    let res = chi_square_gof(&counts, &p);
    assert!(res.p_value > 0.001, "broadcast path diverged: {res:?}");
}

#[test]
fn star_lazy_path_matches_centralized_distribution() {
    let n = 8;
    let state = frozen_state(n);
    let p = state.probabilities();
    let gamma = state.gamma();
    let weights = state.weights().to_vec();
    let z: f64 = weights.iter().sum();
    // Stale estimates strictly below the truth, varied per sensor.
    let z_hat: Vec<f64> = (0..n)
        .map(|v| weights[v].max(z * (0.55 + 0.05 * v as f64)))
        .collect();
    let alpha = 1.0;
    let trials = 100_000u64;
    let mut rng = rng_from_seed(777);
    let mut counts = vec![0u64; n];
    for _ in 0..trials {
        loop {
            let mut reports = Vec::new();
            for v in 0..n {
                let r = unit_draw(&mut rng);
                let view = LazySensorView {
                    weight: weights[v],
                    z_estimate: z_hat[v],
                };
                if lazy_activation_decision(view, gamma, n as f64, alpha, r) {
                    reports.push(ActivationReport {
                        id: v,
                        draw: r,
                        weight: weights[v],
                    });
                }
            }
            let (selected, _) = server_resolve(&reports, z, gamma, n as f64, alpha, &mut rng).unwrap();
            if let Some(v) = selected {
                counts[v] += 1;
                break;
            }
        }
    }
    // rho(w_v, Z) equals the centralized probabilities when Z = sum of
    // weights, and rerun-until-selected renormalizes the scaled law back to
    // them.
    for (v, &pv) in p.iter().enumerate() {
        let mass = rho(weights[v], z, gamma, n as f64);
        assert!((mass - pv).abs() < 1e-12, "sensor {v}");
    }
    let res = chi_square_gof(&counts, &p);
    assert!(res.p_value > 0.001, "star path diverged: {res:?}");
}
