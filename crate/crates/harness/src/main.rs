use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dogsim::bench::{
    dexp3_equivalence_bench, overactivation_bench, protocol_bench, random_simplex, Protocol,
};
use dogsim::csvout::write_csv;
use dogsim::driver::run_experiment;
use dogsim::scenario::{ObjectiveSpec, RunSpec, Scenario};
use dogsim::verify::run_all;
use dogsim_core::algorithms::{brute_force_opt, offline_greedy, RunMode, MAX_BRUTE_FORCE_N};
use dogsim_core::objectives::evaluate;

/// Simulator for distributed online greedy sensor selection.
#[derive(Parser)]
#[command(name = "dogsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo the one-of-n sampling protocols against their laws.
    SampleBench(SampleBenchArgs),
    /// Distribution equivalence and over-activation checks for the
    /// distributed bandit.
    Dexp3Bench(Dexp3BenchArgs),
    /// Run the broadcast-model algorithm and write per-round metrics.
    DogRun(RunArgs),
    /// Run the star-model algorithm with lazy renormalization.
    LazydogRun(LazyRunArgs),
    /// Run the observation-dependent star-model algorithm.
    OddogRun(OdRunArgs),
    /// Print offline greedy (and brute-force, when feasible) selections.
    Greedy(GreedyArgs),
    /// Run the full invariant suite; exits nonzero on any failure.
    Verify(VerifyArgs),
}

fn default_seed() -> u64 {
    std::env::var("DOGSIM_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(42)
}

#[derive(Args)]
struct SampleBenchArgs {
    /// Sensors in the sampled distribution.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Oversampling rate for the Poisson protocol.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Grain N of the improved protocol.
    #[arg(long, default_value_t = 4)]
    grain: u64,
    #[arg(long, default_value_t = 200_000)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Protocol to run: simple | improved | pms | pms-until-selected | all.
    #[arg(long, default_value = "all")]
    protocol: String,
}

#[derive(Args)]
struct Dexp3BenchArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 200_000)]
    trials: u64,
    /// Rounds of the full-run over-activation check.
    #[arg(long, default_value_t = 20_000)]
    rounds: u64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file; inline flags below override its run section.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Write the per-round metrics CSV here (overrides the scenario).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Dump the message trace of trial 0, one line per message.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ScenarioArgs,
}

#[derive(Args)]
struct LazyRunArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Fixed-stage variant that never reruns an empty stage.
    #[arg(long)]
    no_rerun: bool,
}

#[derive(Args)]
struct OdRunArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long)]
    activation_cost: Option<f64>,
    /// Size of the threshold grid.
    #[arg(long)]
    thresholds: Option<usize>,
}

#[derive(Args)]
struct GreedyArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SampleBench(args) => sample_bench(args),
        Command::Dexp3Bench(args) => dexp3_bench(args),
        Command::DogRun(args) => run_mode(args.common, RunMode::DogBroadcast, None, None),
        Command::LazydogRun(args) => {
            let mode = if args.no_rerun {
                RunMode::LazyDogNoRerun
            } else {
                RunMode::LazyDogRerun
            };
            run_mode(args.common, mode, None, None)
        }
        Command::OddogRun(args) => run_mode(
            args.common,
            RunMode::OdDog,
            args.activation_cost,
            args.thresholds,
        ),
        Command::Greedy(args) => greedy(args),
        Command::Verify(args) => {
            return verify(args);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn sample_bench(args: SampleBenchArgs) -> dogsim::Result<()> {
    let seed = args.seed.unwrap_or_else(default_seed);
    let p = random_simplex(args.n, seed);
    let protocols: Vec<Protocol> = match args.protocol.as_str() {
        "simple" => vec![Protocol::Simple],
        "improved" => vec![Protocol::Improved],
        "pms" => vec![Protocol::Pms],
        "pms-until-selected" => vec![Protocol::PmsUntilSelected],
        "all" => vec![
            Protocol::Simple,
            Protocol::Improved,
            Protocol::Pms,
            Protocol::PmsUntilSelected,
        ],
        other => {
            return Err(dogsim::HarnessError::Invalid(format!(
                "unknown protocol `{other}`"
            )))
        }
    };
    println!(
        "# sample-bench  n={} alpha={} grain={} trials={} seed={}",
        args.n, args.alpha, args.grain, args.trials, seed
    );
    for protocol in protocols {
        let bench = protocol_bench(protocol, &p, args.alpha, args.grain, args.trials, seed)?;
        println!("\nprotocol: {}", protocol.name());
        println!("{:>6} {:>12} {:>12} {:>12} {:>8}", "sensor", "mass", "empirical", "theory", "z");
        for s in &bench.sensors {
            match (s.theory, s.z_score) {
                (Some(t), Some(z)) => println!(
                    "{:>6} {:>12.6} {:>12.6} {:>12.6} {:>8.2}",
                    s.id, s.mass, s.empirical, t, z
                ),
                _ => println!("{:>6} {:>12.6} {:>12.6} {:>12} {:>8}", s.id, s.mass, s.empirical, "-", "-"),
            }
        }
        match bench.none_theory {
            Some(t) => println!("{:>6} {:>12} {:>12.6} {:>12.6}", "none", "-", bench.none_rate, t),
            None => println!("{:>6} {:>12} {:>12.6} {:>12}", "none", "-", bench.none_rate, "-"),
        }
        if bench.activation_bound.is_finite() {
            println!(
                "mean activations {:.5} (se {:.5}), bound {:.5}",
                bench.mean_activations, bench.se_activations, bench.activation_bound
            );
        } else {
            println!(
                "mean activations {:.5} (se {:.5})",
                bench.mean_activations, bench.se_activations
            );
        }
    }
    Ok(())
}

fn dexp3_bench(args: Dexp3BenchArgs) -> dogsim::Result<()> {
    let seed = args.seed.unwrap_or_else(default_seed);
    println!(
        "# dexp3-bench  n={} alpha={} trials={} rounds={} seed={}",
        args.n, args.alpha, args.trials, args.rounds, seed
    );
    let eq = dexp3_equivalence_bench(args.n, args.alpha, args.trials, seed)?;
    println!(
        "distribution equivalence (chi-square, {} cells):",
        eq.probabilities.len()
    );
    println!(
        "  broadcast path: stat {:.3}  p {:.5}  -> {}",
        eq.broadcast.statistic,
        eq.broadcast.p_value,
        if eq.broadcast.p_value > 0.001 { "PASS" } else { "FAIL" }
    );
    println!(
        "  star/lazy path: stat {:.3}  p {:.5}  -> {}",
        eq.star.statistic,
        eq.star.p_value,
        if eq.star.p_value > 0.001 { "PASS" } else { "FAIL" }
    );
    let over = overactivation_bench(args.n, args.rounds, args.alpha, false, seed)?;
    println!(
        "over-activation: mean {:.4}/round (se {:.4}) vs bound alpha + (e-1) = {:.4} -> {}",
        over.mean_activations,
        over.se_activations,
        over.bound,
        if over.passed() { "PASS" } else { "FAIL" }
    );
    if !eq.passed(0.001) || !over.passed() {
        return Err(dogsim::HarnessError::Invalid("dexp3-bench check failed".into()));
    }
    Ok(())
}

fn load_scenario(
    common: &ScenarioArgs,
    mode: RunMode,
    activation_cost: Option<f64>,
    thresholds: Option<usize>,
) -> dogsim::Result<Scenario> {
    let mut scenario = match &common.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario {
            objective: ObjectiveSpec::default(),
            run: RunSpec::default(),
            csv_path: None,
        },
    };
    scenario.run.mode = mode;
    if let Some(n) = common.n {
        scenario.objective.sensors = n;
    }
    if let Some(k) = common.k {
        scenario.run.k = k;
    }
    if let Some(rounds) = common.rounds {
        scenario.run.rounds = rounds;
    }
    if let Some(trials) = common.trials {
        scenario.run.trials = trials;
    }
    scenario.run.seed = common.seed.unwrap_or(scenario.run.seed);
    if common.scenario.is_none() && common.seed.is_none() {
        scenario.run.seed = default_seed();
    }
    if let Some(alpha) = common.alpha {
        scenario.run.alpha = Some(alpha);
    }
    if let Some(gamma) = common.gamma {
        scenario.run.gamma = Some(gamma);
    }
    if let Some(eta) = common.eta {
        scenario.run.eta = Some(eta);
    }
    if let Some(cost) = activation_cost {
        scenario.run.activation_cost = cost;
    }
    if let Some(m) = thresholds {
        scenario.run.thresholds = m;
    }
    if let Some(csv) = &common.csv {
        scenario.csv_path = Some(csv.clone());
    }
    Ok(scenario)
}

fn run_mode(
    common: ScenarioArgs,
    mode: RunMode,
    activation_cost: Option<f64>,
    thresholds: Option<usize>,
) -> dogsim::Result<()> {
    let scenario = load_scenario(&common, mode, activation_cost, thresholds)?;
    let result = run_experiment(&scenario)?;
    println!(
        "# {:?}  n={} k={} rounds={} trials={} seed={}",
        scenario.run.mode,
        scenario.objective.sensors,
        scenario.run.k,
        scenario.run.rounds,
        scenario.run.trials,
        scenario.run.seed
    );
    println!(
        "offline greedy per-round value {:.6}; benchmark per-round {:.6}{}",
        result.benchmark.greedy_per_round,
        result.benchmark.optimum_per_round,
        if result.benchmark.is_proxy { " (greedy proxy)" } else { "" }
    );
    println!(
        "{:>5} {:>10} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "trial", "seed", "avg_reward", "greedy_ratio", "messages", "activations", "boosted"
    );
    for s in &result.summaries {
        println!(
            "{:>5} {:>10} {:>12.6} {:>12.6} {:>12} {:>12} {:>10}",
            s.trial, s.seed, s.average_reward, s.greedy_ratio, s.messages, s.activations, s.boosted_activations
        );
    }
    println!(
        "mean avg reward {:.6} (se {:.6}); mean (1-1/e)-regret per round {:.6}",
        result.mean_average_reward,
        result.se_average_reward,
        result
            .summaries
            .iter()
            .map(|s| s.regret.regret_per_round)
            .sum::<f64>()
            / result.summaries.len() as f64
    );
    if let Some(path) = &scenario.csv_path {
        write_csv(&result.rows, path)?;
        println!("wrote {} rows to {}", result.rows.len(), path.display());
    }
    if common.trace {
        let sequence = scenario.objective.build_sequence()?;
        let traced = dogsim::driver::run_trial(&scenario, &sequence, 0, true)?;
        println!("# message trace, trial 0 ({} messages)", traced.trace.len());
        for entry in &traced.trace {
            println!("{entry}");
        }
    }
    Ok(())
}

fn greedy(args: GreedyArgs) -> dogsim::Result<()> {
    let loaded = match &args.scenario {
        Some(path) => Some(Scenario::load(path)?),
        None => None,
    };
    let mut objective_spec = loaded
        .as_ref()
        .map(|s| s.objective.clone())
        .unwrap_or_default();
    if let Some(n) = args.n {
        objective_spec.sensors = n;
    }
    if let Some(seed) = args.seed {
        objective_spec.seed = seed;
    }
    let k = args.k.or(loaded.map(|s| s.run.k)).unwrap_or(3);
    let sequence = objective_spec.build_sequence()?;
    let rounds = 1;
    let bench = dogsim_core::algorithms::sequence_benchmark(&sequence, rounds, k)?;
    let objective = sequence.objective_at(0);
    println!("# greedy  n={} k={k}", objective_spec.sensors);
    println!("greedy selection (in pick order): {:?}", bench.greedy_set);
    println!("greedy value: {:.9}", bench.greedy_per_round);
    if objective_spec.sensors <= MAX_BRUTE_FORCE_N {
        let (opt_set, opt_value) = brute_force_opt(objective.as_ref(), k)?;
        println!("brute-force optimum: {opt_set:?} value {opt_value:.9}");
        let greedy_value = evaluate(
            objective.as_ref(),
            &offline_greedy(objective.as_ref(), k)?,
        )?;
        println!("greedy/optimum ratio: {:.6}", greedy_value / opt_value.max(f64::MIN_POSITIVE));
    } else {
        println!("brute force skipped: n > {MAX_BRUTE_FORCE_N}");
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> ExitCode {
    let seed = args.seed.unwrap_or_else(default_seed);
    println!("# verify  seed={seed}");
    let failures = run_all(seed, |name, result| match result {
        Ok(()) => println!("ok      {name}"),
        Err(message) => println!("FAILED  {name}: {message}"),
    });
    if failures == 0 {
        println!("all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} check(s) failed");
        ExitCode::FAILURE
    }
}
