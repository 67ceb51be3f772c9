//! Experiment driver: runs a scenario over independent seeded trials and
//! assembles the per-round metrics stream.

use dogsim_core::algorithms::{
    dog_run, lazydog_run, oddog_run, regret_1e, sequence_benchmark, RegretReport, RunMode,
    RunResult, SequenceBenchmark,
};
use dogsim_core::objectives::ObjectiveSequence;
use dogsim_core::stats::mean_and_se;

use crate::csvout::MetricsRow;
use crate::scenario::Scenario;
use crate::Result;

const ONE_MINUS_1_OVER_E: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// One trial's headline numbers.
#[derive(Debug, Clone)]
pub struct TrialSummary {
    pub trial: u64,
    pub seed: u64,
    pub average_reward: f64,
    pub greedy_ratio: f64,
    pub messages: u64,
    pub activations: u64,
    pub boosted_activations: u64,
    pub regret: RegretReport,
}

/// All trials of one scenario.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<MetricsRow>,
    pub summaries: Vec<TrialSummary>,
    pub benchmark: SequenceBenchmark,
    /// Mean and standard error of the per-trial average rewards.
    pub mean_average_reward: f64,
    pub se_average_reward: f64,
}

/// Run one trial of a scenario. `collect_trace` records every message.
pub fn run_trial(
    scenario: &Scenario,
    sequence: &ObjectiveSequence,
    trial: u64,
    collect_trace: bool,
) -> Result<RunResult> {
    let config = dogsim_core::algorithms::RunConfig {
        collect_trace,
        ..scenario.run_config(trial)
    };
    let result = match scenario.run.mode {
        RunMode::DogBroadcast => dog_run(&config, sequence)?,
        RunMode::LazyDogRerun | RunMode::LazyDogNoRerun => lazydog_run(&config, sequence)?,
        RunMode::OdDog => oddog_run(&config, sequence)?,
    };
    Ok(result)
}

/// Run the trials on a bounded worker pool. Each trial owns its network,
/// objective handle and random source, so results are identical to a serial
/// run; rows are assembled in trial order afterward.
fn run_trials_pooled(scenario: &Scenario, sequence: &ObjectiveSequence) -> Result<Vec<RunResult>> {
    let trials: Vec<u64> = (0..scenario.run.trials).collect();
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .max(1);
    let mut results: Vec<Option<RunResult>> = trials.iter().map(|_| None).collect();
    for chunk in trials.chunks(workers) {
        let outcomes = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&trial| scope.spawn(move || (trial, run_trial(scenario, sequence, trial, false))))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("trial thread does not panic"))
                .collect::<Vec<_>>()
        });
        for (trial, outcome) in outcomes {
            results[trial as usize] = Some(outcome?);
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every trial ran")).collect())
}

/// Run every trial and assemble the metrics stream.
pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentResult> {
    let sequence = scenario.objective.build_sequence()?;
    let benchmark = sequence_benchmark(&sequence, scenario.run.rounds, scenario.run.k)?;
    let greedy = benchmark.greedy_per_round;
    let bench_scaled = ONE_MINUS_1_OVER_E * benchmark.optimum_per_round;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut finals = Vec::new();
    let trial_results = run_trials_pooled(scenario, &sequence)?;
    for (trial, result) in trial_results.into_iter().enumerate() {
        let trial = trial as u64;
        let mut messages_cum = 0u64;
        let mut activations_cum = 0u64;
        for record in &result.records {
            messages_cum += record.messages;
            activations_cum += record.activations;
            rows.push(MetricsRow {
                trial,
                round: record.t,
                avg_reward: record.running_avg_reward,
                greedy_ratio: if greedy > 0.0 {
                    record.running_avg_reward / greedy
                } else {
                    0.0
                },
                messages_cum,
                activations_cum,
                regret_avg: bench_scaled - record.running_avg_reward,
            });
        }
        let regret = regret_1e(&result.records, &sequence, scenario.run.k)?;
        let average_reward = result.average_reward();
        finals.push(average_reward);
        let totals = result.stats.totals();
        summaries.push(TrialSummary {
            trial,
            seed: scenario.run.seed.wrapping_add(trial),
            average_reward,
            greedy_ratio: if greedy > 0.0 { average_reward / greedy } else { 0.0 },
            messages: totals.messages(),
            activations: totals.activations,
            boosted_activations: totals.boosted_activations,
            regret,
        });
    }
    let (mean_average_reward, se_average_reward) = mean_and_se(&finals);
    Ok(ExperimentResult {
        rows,
        summaries,
        benchmark,
        mean_average_reward,
        se_average_reward,
    })
}
