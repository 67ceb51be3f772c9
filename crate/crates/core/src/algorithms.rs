//! The selection algorithm family and regret accounting.
//!
//! Offline: [`offline_greedy`] and [`brute_force_opt`] provide the
//! benchmarks. Online: [`og_unit_round`] runs the centralized meta-algorithm
//! (one EXP3 instance per stage, fed incremental marginal benefits), and
//! [`dog_run`] / [`lazydog_run`] / [`oddog_run`] execute its distributed
//! implementations over the simulated networks. [`regret_1e`] reports the
//! (1 - 1/e)-regret of a finished run.

use std::sync::Arc;

use crate::bandit::{default_rate, Exp3State};
use crate::error::{Error, Result};
use crate::netsim::{
    BroadcastNetwork, MessageStats, NetParams, OdDogParams, StarNetwork, StarStageMode, TraceEntry,
};
use crate::objectives::{evaluate, Objective, ObjectiveSequence, SensorUniverse};
use crate::rng::{rng_from_seed, SimRng};

/// Largest universe [`brute_force_opt`] will enumerate.
pub const MAX_BRUTE_FORCE_N: usize = 15;

/// Which distributed algorithm a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Broadcast network, rerun-until-selected per stage.
    DogBroadcast,
    /// Star network with lazy renormalization, rerun on empty stages.
    LazyDogRerun,
    /// Star network, `ceil(k / (1 - e^{-alpha}))` stages, no reruns.
    LazyDogNoRerun,
    /// Star network with observation-dependent threshold activation.
    OdDog,
}

/// Full description of one run. Optional parameters resolve to the
/// documented defaults in [`RunConfig::resolve`].
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub k: usize,
    pub rounds: u64,
    pub mode: RunMode,
    pub seed: u64,
    /// Oversampling rate; defaults to 1 in broadcast / no-rerun modes and
    /// `max(1, ln n)` in the star rerun modes.
    pub alpha: Option<f64>,
    /// Exploration probability; defaults to `min(1, sqrt(n ln n / g))`.
    pub gamma: Option<f64>,
    /// Learning rate; defaults to gamma in the broadcast mode and `gamma / n`
    /// in the star modes (the drift rate the lazy over-activation bound
    /// assumes).
    pub eta: Option<f64>,
    /// Reward guess `g` for the default rate; defaults to `rounds * k`.
    pub reward_guess: Option<f64>,
    /// Activation cost per sensor (observation-dependent mode).
    pub activation_cost: f64,
    /// Threshold grid (observation-dependent mode); defaults to 16 uniform
    /// values on [0, 1].
    pub thresholds: Option<Vec<f64>>,
    /// Learning rate of the threshold game; defaults to 0.2.
    pub wmr_eta: Option<f64>,
    /// Sensors use `n_estimate_factor * n` in the exploration term.
    pub n_estimate_factor: f64,
    /// Record every message for the trace dump.
    pub collect_trace: bool,
}

impl RunConfig {
    pub fn new(n: usize, k: usize, rounds: u64, mode: RunMode, seed: u64) -> Self {
        Self {
            n,
            k,
            rounds,
            mode,
            seed,
            alpha: None,
            gamma: None,
            eta: None,
            reward_guess: None,
            activation_cost: 0.0,
            thresholds: None,
            wmr_eta: None,
            n_estimate_factor: 1.0,
            collect_trace: false,
        }
    }

    /// Resolve defaults and validate; returns the network parameters and the
    /// number of stages per round.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::Config(format!("need 1 <= k <= n, got k={} n={}", self.k, self.n)));
        }
        if self.rounds == 0 {
            return Err(Error::Config("need at least one round".into()));
        }
        if !self.n_estimate_factor.is_finite() || self.n_estimate_factor <= 0.0 {
            return Err(Error::Config("n estimate factor must be positive".into()));
        }
        if self.activation_cost < 0.0 {
            return Err(Error::Config("activation cost must be nonnegative".into()));
        }
        let g = self
            .reward_guess
            .unwrap_or((self.rounds * self.k as u64) as f64);
        let gamma = self.gamma.unwrap_or_else(|| default_rate(self.n, g));
        let alpha = self.alpha.unwrap_or(match self.mode {
            RunMode::DogBroadcast | RunMode::LazyDogNoRerun => 1.0,
            RunMode::LazyDogRerun | RunMode::OdDog => (self.n as f64).ln().max(1.0),
        });
        let eta = self.eta.unwrap_or(match self.mode {
            RunMode::DogBroadcast => gamma,
            _ => gamma / self.n as f64,
        });
        let stages = match self.mode {
            RunMode::LazyDogNoRerun => no_rerun_stage_count(self.k, alpha),
            _ => self.k,
        };
        let params = NetParams {
            n: self.n,
            stages,
            alpha,
            gamma,
            eta,
            n_estimate: self.n_estimate_factor * self.n as f64,
        };
        params.validate()?;
        let oddog = match self.mode {
            RunMode::OdDog => Some(OdDogParams {
                thresholds: self
                    .thresholds
                    .clone()
                    .unwrap_or_else(|| (0..16).map(|i| i as f64 / 15.0).collect()),
                costs: vec![self.activation_cost; self.n],
                wmr_eta: self.wmr_eta.unwrap_or(0.2),
            }),
            _ => None,
        };
        Ok(ResolvedRun {
            params,
            stages,
            oddog,
        })
    }
}

/// Parameters after default resolution.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub params: NetParams,
    pub stages: usize,
    pub oddog: Option<OdDogParams>,
}

/// Stage budget of the no-rerun variant: `ceil(k / (1 - e^{-alpha}))`.
///
/// A hair of slack before the ceiling keeps the large-alpha limit at exactly
/// `k` instead of ceiling `k (1 + e^{-alpha} + ...)` up to `k + 1`.
pub fn no_rerun_stage_count(k: usize, alpha: f64) -> usize {
    (k as f64 / (1.0 - (-alpha).exp()) - 1e-7).ceil() as usize
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub selected: Vec<usize>,
    pub reward: f64,
    pub messages: u64,
    pub activations: u64,
    pub boosted_activations: u64,
    pub running_avg_reward: f64,
}

/// A finished run: per-round records plus cumulative message statistics and,
/// when requested, the full message trace.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<RoundRecord>,
    pub stats: MessageStats,
    pub trace: Vec<TraceEntry>,
}

impl RunResult {
    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn average_reward(&self) -> f64 {
        self.total_reward() / self.records.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Offline benchmarks
// ---------------------------------------------------------------------------

/// Greedy maximization under a cardinality constraint, ties broken toward
/// the minimum sensor id. For monotone submodular objectives the result is a
/// (1 - 1/e) approximation of the optimum.
pub fn offline_greedy(objective: &dyn Objective, k: usize) -> Result<Vec<usize>> {
    let n = objective.universe().len();
    if k > n {
        return Err(Error::Config(format!("k={k} exceeds universe size {n}")));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut sorted: Vec<usize> = Vec::with_capacity(k);
    let mut current = evaluate(objective, &sorted)?;
    for _ in 0..k {
        let mut best: Option<(usize, f64, Vec<usize>)> = None;
        for v in 0..n {
            if sorted.binary_search(&v).is_ok() {
                continue;
            }
            let mut candidate = sorted.clone();
            let pos = candidate.binary_search(&v).unwrap_err();
            candidate.insert(pos, v);
            let value = objective.value(&candidate);
            let gain = value - current;
            // Strict improvement keeps the earlier (smaller) id on ties.
            if best.as_ref().is_none_or(|(_, g, _)| gain > *g) {
                best = Some((v, gain, candidate));
            }
        }
        let (v, gain, candidate) = best.expect("k <= n leaves a candidate");
        chosen.push(v);
        sorted = candidate;
        current += gain;
    }
    Ok(chosen)
}

/// Exact maximizer over all subsets of size at most `k`; value ties resolve
/// to the lexicographically smallest id list. Refuses universes above
/// [`MAX_BRUTE_FORCE_N`].
pub fn brute_force_opt(objective: &dyn Objective, k: usize) -> Result<(Vec<usize>, f64)> {
    let n = objective.universe().len();
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::UniverseTooLarge {
            n,
            max: MAX_BRUTE_FORCE_N,
        });
    }
    if k > n {
        return Err(Error::Config(format!("k={k} exceeds universe size {n}")));
    }
    let mut best_set: Vec<usize> = Vec::new();
    let mut best_value = objective.value(&[]);
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let value = objective.value(&set);
        let better = value > best_value || (value == best_value && set < best_set);
        if better {
            best_value = value;
            best_set = set;
        }
    }
    Ok((best_set, best_value))
}

// ---------------------------------------------------------------------------
// Centralized online meta-algorithm
// ---------------------------------------------------------------------------

/// Outcome of one centralized meta-round.
#[derive(Debug, Clone)]
pub struct OgUnitRound {
    /// Arm chosen by each stage bandit, in stage order.
    pub choices: Vec<usize>,
    /// Incremental marginal benefit fed back to each stage bandit.
    pub feedbacks: Vec<f64>,
    /// The selected set (stage choices deduplicated, ascending).
    pub selected: Vec<usize>,
}

/// Incremental feedbacks for a fixed list of stage choices:
/// stage `i` earns `f({v_j : j <= i}) - f({v_j : j < i})`.
pub fn og_unit_feedbacks(objective: &dyn Objective, choices: &[usize]) -> Result<Vec<f64>> {
    let mut feedbacks = Vec::with_capacity(choices.len());
    let mut prefix: Vec<usize> = Vec::new();
    let mut previous = evaluate(objective, &prefix)?;
    for &v in choices {
        prefix.push(v);
        let value = evaluate(objective, &prefix)?;
        feedbacks.push((value - previous).clamp(0.0, 1.0));
        previous = value;
    }
    Ok(feedbacks)
}

/// One round of the meta-algorithm: every stage bandit picks an arm from its
/// current weights, then receives its incremental marginal benefit with the
/// importance weight it sampled under.
pub fn og_unit_round(
    bandits: &mut [Exp3State],
    objective: &dyn Objective,
    rng: &mut SimRng,
) -> Result<OgUnitRound> {
    if bandits.is_empty() {
        return Err(Error::Config("need at least one stage bandit".into()));
    }
    let mut choices = Vec::with_capacity(bandits.len());
    let mut probs = Vec::with_capacity(bandits.len());
    for bandit in bandits.iter() {
        let p = bandit.probabilities();
        let v = bandit.sample(rng);
        probs.push(p[v]);
        choices.push(v);
    }
    let feedbacks = og_unit_feedbacks(objective, &choices)?;
    for ((bandit, &v), (&reward, &p)) in bandits
        .iter_mut()
        .zip(&choices)
        .zip(feedbacks.iter().zip(&probs))
    {
        bandit.update(v, reward, p)?;
    }
    let mut selected = choices.clone();
    selected.sort_unstable();
    selected.dedup();
    Ok(OgUnitRound {
        choices,
        feedbacks,
        selected,
    })
}

// ---------------------------------------------------------------------------
// Distributed runs
// ---------------------------------------------------------------------------

fn check_sequence(config: &RunConfig, sequence: &ObjectiveSequence) -> Result<()> {
    if sequence.universe().len() != config.n {
        return Err(Error::Config(format!(
            "objective universe has {} sensors, run expects {}",
            sequence.universe().len(),
            config.n
        )));
    }
    Ok(())
}

/// Fully distributed run in the broadcast model.
pub fn dog_run(config: &RunConfig, sequence: &ObjectiveSequence) -> Result<RunResult> {
    if config.mode != RunMode::DogBroadcast {
        return Err(Error::Config("dog_run requires the broadcast mode".into()));
    }
    check_sequence(config, sequence)?;
    let resolved = config.resolve()?;
    let mut net = BroadcastNetwork::new(resolved.params, config.collect_trace)?;
    let mut rng = rng_from_seed(config.seed);
    let mut records = Vec::with_capacity(config.rounds as usize);
    let mut cumulative = 0.0;
    for t in 0..config.rounds {
        let objective = sequence.objective_at(t).clone();
        net.begin_round();
        let mut activations = 0;
        let mut boosted = 0;
        for stage in 0..resolved.stages {
            let out = net.run_stage(stage, objective.as_ref(), &mut rng)?;
            activations += out.activations;
            boosted += out.boosted_activations;
        }
        let selected = net.round_selection().to_vec();
        let reward = evaluate(objective.as_ref(), &selected)?;
        let round = net.fabric.stats.current_round();
        net.end_round();
        cumulative += reward;
        records.push(RoundRecord {
            t,
            selected,
            reward,
            messages: round.messages(),
            activations,
            boosted_activations: boosted,
            running_avg_reward: cumulative / (t + 1) as f64,
        });
    }
    Ok(RunResult {
        records,
        stats: net.fabric.stats.clone(),
        trace: net.fabric.trace().map(<[_]>::to_vec).unwrap_or_default(),
    })
}

fn star_run(config: &RunConfig, sequence: &ObjectiveSequence, mode: StarStageMode) -> Result<RunResult> {
    check_sequence(config, sequence)?;
    let resolved = config.resolve()?;
    let mut net = StarNetwork::new(resolved.params, resolved.oddog.clone(), config.collect_trace)?;
    let mut rng = rng_from_seed(config.seed);
    let mut records = Vec::with_capacity(config.rounds as usize);
    let mut cumulative = 0.0;
    for t in 0..config.rounds {
        let objective = sequence.objective_at(t).clone();
        net.begin_round();
        let mut activations = 0;
        let mut boosted = 0;
        for stage in 0..resolved.stages {
            let out = net.run_stage(stage, objective.as_ref(), mode, &mut rng)?;
            activations += out.activations;
            boosted += out.boosted_activations;
        }
        let selected = net.round_selection().to_vec();
        let reward = evaluate(objective.as_ref(), &selected)?;
        let round = net.fabric.stats.current_round();
        net.end_round();
        cumulative += reward;
        records.push(RoundRecord {
            t,
            selected,
            reward,
            messages: round.messages(),
            activations,
            boosted_activations: boosted,
            running_avg_reward: cumulative / (t + 1) as f64,
        });
    }
    Ok(RunResult {
        records,
        stats: net.fabric.stats.clone(),
        trace: net.fabric.trace().map(<[_]>::to_vec).unwrap_or_default(),
    })
}

/// Star-network run with lazy renormalization, in the rerun or the
/// fixed-stage no-rerun variant.
pub fn lazydog_run(config: &RunConfig, sequence: &ObjectiveSequence) -> Result<RunResult> {
    match config.mode {
        RunMode::LazyDogRerun => star_run(config, sequence, StarStageMode::Rerun),
        RunMode::LazyDogNoRerun => star_run(config, sequence, StarStageMode::NoRerun),
        _ => Err(Error::Config("lazydog_run requires a lazy star mode".into())),
    }
}

/// Star-network run with observation-dependent threshold activation.
pub fn oddog_run(config: &RunConfig, sequence: &ObjectiveSequence) -> Result<RunResult> {
    if config.mode != RunMode::OdDog {
        return Err(Error::Config("oddog_run requires the observation-dependent mode".into()));
    }
    star_run(config, sequence, StarStageMode::ObservationDependent)
}

// ---------------------------------------------------------------------------
// Regret
// ---------------------------------------------------------------------------

/// Round-occurrence-weighted average of an objective pool; used as the
/// benchmark objective, since `max_S sum_t f_t(S)` equals `rounds *
/// max_S f_avg(S)`.
struct AverageObjective<'a> {
    pool: &'a [Arc<dyn Objective>],
    weights: Vec<f64>,
}

impl Objective for AverageObjective<'_> {
    fn universe(&self) -> SensorUniverse {
        self.pool[0].universe()
    }

    fn value(&self, set: &[usize]) -> f64 {
        self.pool
            .iter()
            .zip(&self.weights)
            .map(|(f, &w)| w * f.value(set))
            .sum()
    }
}

/// Offline benchmark of a sequence over a fixed horizon.
#[derive(Debug, Clone)]
pub struct SequenceBenchmark {
    pub greedy_set: Vec<usize>,
    /// Per-round value of the greedy set under the occurrence-weighted
    /// average objective.
    pub greedy_per_round: f64,
    pub optimum_set: Vec<usize>,
    pub optimum_per_round: f64,
    /// True when the optimum is the greedy proxy (universe too large for
    /// brute force).
    pub is_proxy: bool,
}

/// Best fixed k-set benchmarks for `rounds` rounds of `sequence`: greedy
/// always, brute force when the universe is small enough, greedy proxy
/// (flagged) otherwise.
pub fn sequence_benchmark(
    sequence: &ObjectiveSequence,
    rounds: u64,
    k: usize,
) -> Result<SequenceBenchmark> {
    if rounds == 0 {
        return Err(Error::Config("benchmark needs at least one round".into()));
    }
    let counts = sequence.occurrence_counts(rounds);
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / rounds as f64).collect();
    let avg = AverageObjective {
        pool: sequence.pool(),
        weights,
    };
    let n = avg.universe().len();
    let greedy_set = offline_greedy(&avg, k)?;
    let greedy_per_round = evaluate(&avg, &greedy_set)?;
    let (optimum_set, optimum_per_round, is_proxy) = if n <= MAX_BRUTE_FORCE_N {
        let (set, value) = brute_force_opt(&avg, k)?;
        (set, value, false)
    } else {
        (greedy_set.clone(), greedy_per_round, true)
    };
    Ok(SequenceBenchmark {
        greedy_set,
        greedy_per_round,
        optimum_set,
        optimum_per_round,
        is_proxy,
    })
}

/// Regret of a run against the best fixed set in hindsight, scaled by the
/// `(1 - 1/e)` approximability ceiling.
#[derive(Debug, Clone)]
pub struct RegretReport {
    /// `max_S sum_t f_t(S)`, exact for small universes, greedy proxy above.
    pub benchmark_total: f64,
    pub benchmark_set: Vec<usize>,
    /// True when the benchmark came from greedy rather than brute force.
    pub benchmark_is_proxy: bool,
    /// `sum_t f_t(greedy set of the average objective)`.
    pub greedy_total: f64,
    pub cumulative_reward: f64,
    /// `(1 - 1/e) * benchmark_total - cumulative_reward`.
    pub regret: f64,
    pub regret_per_round: f64,
    /// `cumulative_reward / greedy_total`.
    pub ratio_to_greedy: f64,
}

/// Compute the (1 - 1/e)-regret of `records` against `sequence`.
///
/// The benchmark maximizes the occurrence-weighted average objective: exactly
/// (brute force) when the universe has at most [`MAX_BRUTE_FORCE_N`] sensors,
/// otherwise with the greedy proxy, flagged in the report.
pub fn regret_1e(records: &[RoundRecord], sequence: &ObjectiveSequence, k: usize) -> Result<RegretReport> {
    if records.is_empty() {
        return Err(Error::Config("no rounds recorded".into()));
    }
    let rounds = records.len() as u64;
    let bench = sequence_benchmark(sequence, rounds, k)?;
    let benchmark_total = bench.optimum_per_round * rounds as f64;
    let greedy_total = bench.greedy_per_round * rounds as f64;
    let cumulative: f64 = records.iter().map(|r| r.reward).sum();
    let scale = 1.0 - (-1.0f64).exp();
    let regret = scale * benchmark_total - cumulative;
    Ok(RegretReport {
        benchmark_total,
        benchmark_set: bench.optimum_set,
        benchmark_is_proxy: bench.is_proxy,
        greedy_total,
        cumulative_reward: cumulative,
        regret,
        regret_per_round: regret / rounds as f64,
        ratio_to_greedy: if greedy_total > 0.0 {
            cumulative / greedy_total
        } else {
            0.0
        },
    })
}
