//! The `verify` subcommand: a fast pass over every module's invariants.
//!
//! Each check is independent and returns a failure description instead of
//! panicking, so the CLI can print the full scoreboard before exiting
//! nonzero.

use std::sync::Arc;

use dogsim_core::algorithms::{brute_force_opt, offline_greedy, oddog_run, RunConfig, RunMode};
use dogsim_core::bandit::Exp3State;
use dogsim_core::netsim::{BroadcastNetwork, NetParams, StarNetwork, StarStageMode};
use dogsim_core::objectives::{
    check_monotone_submodular, evaluate, CoverageObjective, DetectionObjective,
    GaussianEmseObjective, Objective, ObjectiveSequence,
};
use dogsim_core::rng::rng_from_seed;
use dogsim_core::sampling::{
    lazy_activation_decision, pms_protocol, pms_until_selected, poisson_inverse_cdf, rho,
    LazySensorView,
};
use dogsim_core::stats::{binomial_sigma, chi_square_gof};

use crate::bench::random_simplex;
use crate::csvout::{csv_string, parse_csv, MetricsRow};
use crate::driver::run_experiment;
use crate::scenario::Scenario;

type CheckResult = std::result::Result<(), String>;

pub struct Check {
    pub name: &'static str,
    run: fn(u64) -> CheckResult,
}

/// Every invariant check, in module order.
pub fn all_checks() -> Vec<Check> {
    vec![
        Check { name: "objectives: shipped families are monotone submodular", run: objectives_families },
        Check { name: "objectives: evaluation bounds and empty-set zero", run: objectives_bounds },
        Check { name: "bandit: probability simplex with exploration floor", run: bandit_simplex },
        Check { name: "bandit: weight rescaling leaves probabilities fixed", run: bandit_rescale },
        Check { name: "sampling: pms selection law and message budget", run: sampling_pms_law },
        Check { name: "sampling: rerun wrapper reproduces the input law", run: sampling_rerun_law },
        Check { name: "sampling: lazy activation covers positive counts", run: sampling_coupling },
        Check { name: "netsim: broadcast normalizers bit-identical", run: netsim_coherence },
        Check { name: "netsim: star estimates stay below the truth", run: netsim_lazy_bound },
        Check { name: "netsim: server footprint independent of n", run: netsim_footprint },
        Check { name: "algorithms: greedy guarantee vs brute force", run: algorithms_greedy },
        Check { name: "algorithms: zero thresholds reproduce offline greedy", run: algorithms_oddog_greedy },
        Check { name: "harness: csv round-trip exact", run: harness_csv },
        Check { name: "harness: identical scenario and seed, identical bytes", run: harness_determinism },
    ]
}

/// Run all checks; returns the number of failures.
pub fn run_all(seed: u64, mut report: impl FnMut(&str, &CheckResult)) -> usize {
    let mut failures = 0;
    for check in all_checks() {
        let result = (check.run)(seed);
        if result.is_err() {
            failures += 1;
        }
        report(check.name, &result);
    }
    failures
}

fn ensure(cond: bool, message: impl Into<String>) -> CheckResult {
    if cond {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn objectives_families(seed: u64) -> CheckResult {
    let families: Vec<(&str, Box<dyn Objective>)> = vec![
        ("coverage", Box::new(CoverageObjective::random_grid(8, 4, 0.3, seed))),
        ("detection", Box::new(DetectionObjective::random(8, 5, seed))),
        (
            "gaussian-one-factor",
            Box::new(GaussianEmseObjective::one_factor(8, seed).map_err(|e| e.to_string())?),
        ),
        (
            "gaussian-equicorrelated",
            Box::new(GaussianEmseObjective::equicorrelated(8, 0.45).map_err(|e| e.to_string())?),
        ),
        ("gaussian-identity", Box::new(GaussianEmseObjective::identity(8))),
    ];
    for (name, f) in families {
        let report = check_monotone_submodular(f.as_ref(), 10).map_err(|e| e.to_string())?;
        ensure(report.passed(), format!("{name}: {report:?}"))?;
    }
    Ok(())
}

fn objectives_bounds(seed: u64) -> CheckResult {
    let f = CoverageObjective::random_grid(10, 4, 0.3, seed);
    let empty = evaluate(&f, &[]).map_err(|e| e.to_string())?;
    ensure(empty == 0.0, format!("f(∅) = {empty}"))?;
    let full: Vec<usize> = (0..10).collect();
    let top = evaluate(&f, &full).map_err(|e| e.to_string())?;
    ensure(top <= 1.0 + 1e-12, format!("f(V) = {top}"))?;
    for size in 1..10 {
        let v = evaluate(&f, &full[..size]).map_err(|e| e.to_string())?;
        ensure(v <= top + 1e-12, format!("f grew past f(V): {v} > {top}"))?;
    }
    Ok(())
}

fn bandit_simplex(seed: u64) -> CheckResult {
    let mut rng = rng_from_seed(seed);
    for _ in 0..100 {
        let n = 2 + (rand::Rng::random_range(&mut rng, 0..10));
        let weights: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rand::Rng::random_range(&mut rng, -6.0..6.0)))
            .collect();
        let gamma: f64 = rand::Rng::random_range(&mut rng, 0.01..1.0);
        let state = Exp3State::with_weights(weights, gamma, 0.1).map_err(|e| e.to_string())?;
        let p = state.probabilities();
        let sum: f64 = p.iter().sum();
        ensure((sum - 1.0).abs() < 1e-12, format!("sum {sum}"))?;
        let floor = gamma / n as f64;
        ensure(
            p.iter().all(|&x| x >= floor - 1e-15),
            "component below the exploration floor",
        )?;
    }
    Ok(())
}

fn bandit_rescale(_seed: u64) -> CheckResult {
    let weights = [0.3, 4.0, 1.7, 0.01];
    let a = Exp3State::with_weights(weights.to_vec(), 0.25, 0.1).map_err(|e| e.to_string())?;
    let b = Exp3State::with_weights(
        weights.iter().map(|w| w * 7.3e55).collect(),
        0.25,
        0.1,
    )
    .map_err(|e| e.to_string())?;
    for (x, y) in a.probabilities().iter().zip(b.probabilities()) {
        ensure((x - y).abs() < 1e-12, format!("probability moved: {x} vs {y}"))?;
    }
    Ok(())
}

fn sampling_pms_law(seed: u64) -> CheckResult {
    let p = random_simplex(6, seed);
    let trials = 50_000u64;
    let mut rng = rng_from_seed(seed ^ 0xABCD);
    let mut counts = [0u64; 6];
    let mut none = 0u64;
    let mut act_total = 0u64;
    for _ in 0..trials {
        let out = pms_protocol(&p, 1.0, &mut rng).map_err(|e| e.to_string())?;
        match out.selected {
            Some(v) => counts[v] += 1,
            None => none += 1,
        }
        act_total += out.activations();
    }
    let scale = 1.0 - (-1.0f64).exp();
    for v in 0..6 {
        let target = scale * p[v];
        let freq = counts[v] as f64 / trials as f64;
        let sigma = binomial_sigma(target, trials);
        ensure(
            (freq - target).abs() <= 4.0 * sigma,
            format!("sensor {v}: {freq} vs {target}"),
        )?;
    }
    let none_rate = none as f64 / trials as f64;
    let target = (-1.0f64).exp();
    ensure(
        (none_rate - target).abs() <= 4.0 * binomial_sigma(target, trials),
        format!("none rate {none_rate} vs {target}"),
    )?;
    let mean_act = act_total as f64 / trials as f64;
    ensure(mean_act <= 1.02, format!("mean activations {mean_act} above alpha"))
}

fn sampling_rerun_law(seed: u64) -> CheckResult {
    let p = random_simplex(5, seed ^ 0x51);
    let trials = 50_000u64;
    let mut rng = rng_from_seed(seed ^ 0x17);
    let mut counts = vec![0u64; 5];
    for _ in 0..trials {
        let out = pms_until_selected(&p, 1.0, &mut rng).map_err(|e| e.to_string())?;
        counts[out.selected.expect("always selects")] += 1;
    }
    let res = chi_square_gof(&counts, &p);
    ensure(res.p_value > 0.001, format!("chi-square {res:?}"))
}

fn sampling_coupling(_seed: u64) -> CheckResult {
    let gamma = 0.1;
    let n = 12.0;
    for alpha in [0.7, 1.0, 2.5] {
        for wi in 1..=6 {
            let w = wi as f64;
            let z = 14.0;
            for fi in 0..=4 {
                let z_hat = w.max(z * (0.3 + 0.15 * fi as f64)).min(z);
                for ri in 0..50 {
                    let r = ri as f64 / 50.0;
                    let y = poisson_inverse_cdf(alpha * rho(w, z, gamma, n), r)
                        .map_err(|e| e.to_string())?;
                    if y >= 1 {
                        let view = LazySensorView { weight: w, z_estimate: z_hat };
                        ensure(
                            lazy_activation_decision(view, gamma, n, alpha, r),
                            format!("count {y} without activation: w={w} z_hat={z_hat} r={r}"),
                        )?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn netsim_coherence(seed: u64) -> CheckResult {
    let objective = CoverageObjective::random_grid(6, 4, 0.35, seed);
    let params = NetParams {
        n: 6,
        stages: 2,
        alpha: 1.0,
        gamma: 0.1,
        eta: 0.1,
        n_estimate: 6.0,
    };
    let mut net = BroadcastNetwork::new(params, false).map_err(|e| e.to_string())?;
    let mut rng = rng_from_seed(seed);
    for _ in 0..60 {
        net.begin_round();
        for stage in 0..2 {
            net.run_stage(stage, &objective, &mut rng).map_err(|e| e.to_string())?;
            let z0 = net.nodes[0].normalizers[stage].to_bits();
            ensure(
                net.nodes.iter().all(|nd| nd.normalizers[stage].to_bits() == z0),
                "normalizers diverged across nodes",
            )?;
        }
        net.end_round();
    }
    Ok(())
}

fn netsim_lazy_bound(seed: u64) -> CheckResult {
    let objective = CoverageObjective::random_grid(8, 4, 0.35, seed);
    let params = NetParams {
        n: 8,
        stages: 2,
        alpha: 1.0,
        gamma: 0.1,
        eta: 0.1 / 8.0,
        n_estimate: 8.0,
    };
    let mut net = StarNetwork::new(params, None, false).map_err(|e| e.to_string())?;
    let mut rng = rng_from_seed(seed ^ 3);
    for _ in 0..100 {
        net.begin_round();
        for stage in 0..2 {
            net.run_stage(stage, &objective, StarStageMode::Rerun, &mut rng)
                .map_err(|e| e.to_string())?;
            let z = net.server.normalizers[stage];
            ensure(
                net.nodes.iter().all(|nd| nd.normalizers[stage] <= z + 1e-12),
                "a stale estimate exceeded the true normalizer",
            )?;
        }
        net.end_round();
    }
    Ok(())
}

fn netsim_footprint(_seed: u64) -> CheckResult {
    for n in [4usize, 32, 128] {
        let params = NetParams {
            n,
            stages: 4,
            alpha: 1.0,
            gamma: 0.1,
            eta: 0.01,
            n_estimate: n as f64,
        };
        let net = StarNetwork::new(params, None, false).map_err(|e| e.to_string())?;
        ensure(
            net.server.persistent_scalars() == 4,
            format!("server keeps {} scalars at n = {n}", net.server.persistent_scalars()),
        )?;
    }
    Ok(())
}

fn algorithms_greedy(seed: u64) -> CheckResult {
    let scale = 1.0 - 1.0 / std::f64::consts::E;
    for i in 0..60u64 {
        let s = seed.wrapping_add(i);
        let k = 1 + (i % 3) as usize;
        let f: Box<dyn Objective> = if i % 2 == 0 {
            Box::new(CoverageObjective::random_grid(8, 3, 0.3, s))
        } else {
            Box::new(DetectionObjective::random(8, 5, s))
        };
        let greedy = offline_greedy(f.as_ref(), k).map_err(|e| e.to_string())?;
        let greedy_value = evaluate(f.as_ref(), &greedy).map_err(|e| e.to_string())?;
        let (_, opt) = brute_force_opt(f.as_ref(), k).map_err(|e| e.to_string())?;
        ensure(
            greedy_value >= scale * opt - 1e-9,
            format!("instance {i}: greedy {greedy_value} vs optimum {opt}"),
        )?;
    }
    Ok(())
}

fn algorithms_oddog_greedy(seed: u64) -> CheckResult {
    let f = Arc::new(CoverageObjective::random_grid(8, 4, 0.35, seed)) as Arc<dyn Objective>;
    let sequence = ObjectiveSequence::constant(f.clone());
    let config = RunConfig {
        thresholds: Some(vec![0.0]),
        activation_cost: 0.0,
        ..RunConfig::new(8, 3, 20, RunMode::OdDog, seed)
    };
    let result = oddog_run(&config, &sequence).map_err(|e| e.to_string())?;
    let mut greedy = offline_greedy(f.as_ref(), 3).map_err(|e| e.to_string())?;
    greedy.sort_unstable();
    for record in &result.records {
        ensure(
            record.selected == greedy,
            format!("round {}: {:?} != greedy {:?}", record.t, record.selected, greedy),
        )?;
    }
    Ok(())
}

fn harness_csv(_seed: u64) -> CheckResult {
    let rows: Vec<MetricsRow> = (0..20)
        .map(|i| MetricsRow {
            trial: i / 7,
            round: i % 7,
            avg_reward: 1.0 / (i as f64 + 3.7),
            greedy_ratio: 0.9999999999999 + i as f64 * 1e-15,
            messages_cum: i * 3,
            activations_cum: i,
            regret_avg: -0.1 + i as f64 * 0.001,
        })
        .collect();
    let text = csv_string(&rows).map_err(|e| e.to_string())?;
    let parsed = parse_csv(&text).map_err(|e| e.to_string())?;
    for (a, b) in rows.iter().zip(&parsed) {
        ensure(
            a.avg_reward.to_bits() == b.avg_reward.to_bits()
                && a.greedy_ratio.to_bits() == b.greedy_ratio.to_bits()
                && a.regret_avg.to_bits() == b.regret_avg.to_bits(),
            "round trip changed a value",
        )?;
    }
    ensure(csv_string(&[]).is_err(), "empty record set must be refused")
}

fn harness_determinism(seed: u64) -> CheckResult {
    let text = format!(
        "[objective]\nfamily = coverage-grid\nsensors = 8\ngrid = 4\nradius = 0.3\nseed = 5\n\n\
         [run]\nmode = lazydog\nk = 2\nrounds = 25\ntrials = 2\nseed = {seed}\n"
    );
    let scenario = Scenario::parse(&text, "verify").map_err(|e| e.to_string())?;
    let a = run_experiment(&scenario).map_err(|e| e.to_string())?;
    let b = run_experiment(&scenario).map_err(|e| e.to_string())?;
    let csv_a = csv_string(&a.rows).map_err(|e| e.to_string())?;
    let csv_b = csv_string(&b.rows).map_err(|e| e.to_string())?;
    ensure(csv_a == csv_b, "same scenario and seed produced different bytes")
}
