//! Simulated communication substrates with exact message accounting.
//!
//! Two models are supported. In the broadcast model any sensor reaches all
//! others at unit cost per message; in the star model messages travel only
//! between a sensor and the base station, at unit cost each. Every protocol
//! step that transmits ("broadcast <...>", "send <...>") costs exactly one
//! message; clock synchronization and timeouts cost zero.
//!
//! A network instance is a single-owner deterministic state machine: one
//! logical thread advances rounds, and all randomness comes from the caller's
//! random source.

use crate::bandit::WmrState;
use crate::error::{Error, Result};
use crate::objectives::{evaluate, Objective};
use crate::rng::{pick_proportional, unit_draw, SimRng};
use crate::sampling::{lazy_activation_decision, poisson_inverse_cdf, rho, LazySensorView};

/// Broadcast-mode normalizers are renormalized past this magnitude.
const RENORM_THRESHOLD: f64 = 1e100;
/// Renormalization divisor, 2^333; a power of two preserves every
/// weight/normalizer ratio bit-exactly.
const RENORM_FACTOR: f64 = 1.7498005798264095e100;
/// Star-mode normalizers cannot be renormalized without resynchronizing the
/// stale sensor estimates, so a run that drifts this far is refused.
const STAR_NORMALIZER_LIMIT: f64 = 1e250;

const MAX_RERUNS_PER_STAGE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkKind {
    Broadcast,
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Sensor(usize),
    Server,
    /// Destination of a broadcast.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    /// Broadcast: "I sampled X_v >= 1" (includes the count).
    SampledAnnounce,
    /// Broadcast: the stage coordinator names the selected sensor.
    Select,
    /// Broadcast: the selected sensor shares its weight delta.
    WeightUpdate,
    /// Star: an activated sensor reports (r_v, w_v) to the server.
    ActivationReport,
    /// Star: the server refreshes an activated sensor with (Z, w).
    ServerReply,
    /// Star: the server tells a sensor to rerun the stage.
    RerunNotice,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::SampledAnnounce => "sampled",
            MessageKind::Select => "select",
            MessageKind::WeightUpdate => "weight-update",
            MessageKind::ActivationReport => "activation-report",
            MessageKind::ServerReply => "server-reply",
            MessageKind::RerunNotice => "rerun-notice",
        }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Sensor(id) => write!(f, "sensor:{id}"),
            Endpoint::Server => write!(f, "server"),
            Endpoint::All => write!(f, "all"),
        }
    }
}

/// One message in the optional trace dump.
#[derive(Debug, Clone, Copy)]
pub struct TraceEntry {
    pub round: u64,
    pub stage: usize,
    pub kind: MessageKind,
    pub src: Endpoint,
    pub dst: Endpoint,
}

impl std::fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "round={} stage={} type={} src={} dst={}",
            self.round,
            self.stage,
            self.kind.as_str(),
            self.src,
            self.dst
        )
    }
}

/// Per-round message counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundStats {
    pub broadcasts: u64,
    pub unicasts: u64,
    pub activations: u64,
    /// Activations fired by the observation-dependent threshold rule that the
    /// baseline lazy rule would not have produced this round.
    pub boosted_activations: u64,
}

impl RoundStats {
    pub fn messages(&self) -> u64 {
        self.broadcasts + self.unicasts
    }

    fn add(&mut self, other: &RoundStats) {
        self.broadcasts += other.broadcasts;
        self.unicasts += other.unicasts;
        self.activations += other.activations;
        self.boosted_activations += other.boosted_activations;
    }
}

/// Cumulative message and activation accounting with per-round history.
#[derive(Debug, Clone, Default)]
pub struct MessageStats {
    totals: RoundStats,
    history: Vec<RoundStats>,
    current: RoundStats,
}

impl MessageStats {
    pub fn begin_round(&mut self) {
        self.current = RoundStats::default();
    }

    pub fn end_round(&mut self) {
        self.totals.add(&self.current);
        self.history.push(self.current);
        self.current = RoundStats::default();
    }

    pub fn totals(&self) -> RoundStats {
        self.totals
    }

    /// Counters of the round currently in progress.
    pub fn current_round(&self) -> RoundStats {
        self.current
    }

    pub fn history(&self) -> &[RoundStats] {
        &self.history
    }

    pub fn broadcasts(&self) -> u64 {
        self.totals.broadcasts
    }

    pub fn unicasts(&self) -> u64 {
        self.totals.unicasts
    }

    pub fn activations(&self) -> u64 {
        self.totals.activations
    }

    pub fn messages(&self) -> u64 {
        self.totals.messages()
    }

    fn record_broadcast(&mut self) {
        self.current.broadcasts += 1;
    }

    fn record_unicast(&mut self) {
        self.current.unicasts += 1;
    }

    fn record_activation(&mut self, boosted: bool) {
        self.current.activations += 1;
        if boosted {
            self.current.boosted_activations += 1;
        }
    }
}

/// The message substrate: counts every message and enforces the model rules.
#[derive(Debug)]
pub struct Fabric {
    kind: NetworkKind,
    pub stats: MessageStats,
    trace: Option<Vec<TraceEntry>>,
    round: u64,
    stage: usize,
}

impl Fabric {
    pub fn new(kind: NetworkKind, collect_trace: bool) -> Self {
        Self {
            kind,
            stats: MessageStats::default(),
            trace: collect_trace.then(Vec::new),
            round: 0,
            stage: 0,
        }
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn trace(&self) -> Option<&[TraceEntry]> {
        self.trace.as_deref()
    }

    fn set_position(&mut self, round: u64, stage: usize) {
        self.round = round;
        self.stage = stage;
    }

    fn push_trace(&mut self, kind: MessageKind, src: Endpoint, dst: Endpoint) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceEntry {
                round: self.round,
                stage: self.stage,
                kind,
                src,
                dst,
            });
        }
    }

    /// One unit-cost message from `src` to every sensor.
    pub fn broadcast(&mut self, src: usize, kind: MessageKind) -> Result<()> {
        if self.kind != NetworkKind::Broadcast {
            return Err(Error::ModelViolation(
                "broadcast is not available on a star network".into(),
            ));
        }
        self.stats.record_broadcast();
        self.push_trace(kind, Endpoint::Sensor(src), Endpoint::All);
        Ok(())
    }

    /// One unit-cost message between a sensor and the server.
    pub fn unicast(&mut self, src: Endpoint, dst: Endpoint, kind: MessageKind) -> Result<()> {
        if self.kind != NetworkKind::Star {
            return Err(Error::ModelViolation(
                "unicast is only defined on the star network".into(),
            ));
        }
        let touches_server = src == Endpoint::Server || dst == Endpoint::Server;
        if !touches_server {
            return Err(Error::ModelViolation(
                "sensors can only exchange messages with the base station".into(),
            ));
        }
        if src == Endpoint::All || dst == Endpoint::All {
            return Err(Error::ModelViolation("unicast takes single endpoints".into()));
        }
        self.stats.record_unicast();
        self.push_trace(kind, src, dst);
        Ok(())
    }
}

/// Resolved per-run network parameters.
#[derive(Debug, Clone, Copy)]
pub struct NetParams {
    pub n: usize,
    /// Bandit instances (stages) per round.
    pub stages: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    /// Denominator of the exploration term; `c * n` models sensors that only
    /// estimate the network size.
    pub n_estimate: f64,
}

impl NetParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.stages == 0 {
            return Err(Error::Config("need at least one sensor and one stage".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha {} must be positive", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta {} must be positive", self.eta)));
        }
        if !self.n_estimate.is_finite() || self.n_estimate <= 0.0 {
            return Err(Error::Config("n estimate must be positive".into()));
        }
        // rho never exceeds (1 - gamma) + gamma / n_estimate, and the Poisson
        // inversion supports means up to 64.
        let max_rate = self.alpha * ((1.0 - self.gamma) + self.gamma / self.n_estimate);
        if max_rate > 64.0 {
            return Err(Error::Config(format!(
                "alpha {} drives Poisson rates up to {max_rate:.2}, beyond the supported 64",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Local state of one sensor.
#[derive(Debug, Clone)]
pub struct SensorNode {
    pub id: usize,
    /// One weight per stage.
    pub weights: Vec<f64>,
    /// Exact normalizers in broadcast mode; lazy lower-bound estimates in
    /// star mode.
    pub normalizers: Vec<f64>,
    /// This sensor's view of the round's selected set (broadcast mode).
    pub selected_view: Vec<usize>,
    /// Threshold learners, one per stage (observation-dependent mode only).
    pub wmr: Vec<WmrState>,
    pub activation_cost: f64,
}

impl SensorNode {
    fn new(id: usize, stages: usize, n: usize) -> Self {
        Self {
            id,
            weights: vec![1.0; stages],
            normalizers: vec![n as f64; stages],
            selected_view: Vec::new(),
            wmr: Vec::new(),
            activation_cost: 0.0,
        }
    }
}

/// Outcome of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageOutcome {
    pub selected: Option<usize>,
    /// Sensor activations in this stage, failed reruns included.
    pub activations: u64,
    pub boosted_activations: u64,
    pub reruns: u64,
}

fn insert_sorted(set: &mut Vec<usize>, v: usize) {
    if let Err(pos) = set.binary_search(&v) {
        set.insert(pos, v);
    }
}

fn checked_exponent(eta: f64, reward: f64, p_used: f64) -> Result<f64> {
    let exponent = eta * reward / p_used;
    if exponent > 600.0 {
        return Err(Error::Contract(format!(
            "weight-update exponent {exponent:.3e} not representable; lower eta or raise gamma"
        )));
    }
    Ok(exponent)
}

// ---------------------------------------------------------------------------
// Broadcast model
// ---------------------------------------------------------------------------

/// All-to-all network running the fully distributed selection protocol.
///
/// Per stage: every sensor draws `X_v ~ Poisson(α ρ(w_v, Z_v))` and announces
/// if `X_v >= 1` (one broadcast each); the minimum-id activator selects one
/// announcer proportionally to the counts and broadcasts the choice; the
/// selected sensor broadcasts its weight delta, which every node applies to
/// its normalizer. A stage with no activators times out silently and reruns,
/// so a stage always costs exactly `activations + 2` broadcasts.
#[derive(Debug)]
pub struct BroadcastNetwork {
    params: NetParams,
    pub nodes: Vec<SensorNode>,
    pub fabric: Fabric,
    round: u64,
}

impl BroadcastNetwork {
    pub fn new(params: NetParams, collect_trace: bool) -> Result<Self> {
        params.validate()?;
        let nodes = (0..params.n)
            .map(|id| SensorNode::new(id, params.stages, params.n))
            .collect();
        Ok(Self {
            params,
            nodes,
            fabric: Fabric::new(NetworkKind::Broadcast, collect_trace),
            round: 0,
        })
    }

    pub fn params(&self) -> NetParams {
        self.params
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn begin_round(&mut self) {
        self.fabric.stats.begin_round();
        for node in &mut self.nodes {
            node.selected_view.clear();
        }
    }

    pub fn end_round(&mut self) {
        self.fabric.stats.end_round();
        self.round += 1;
    }

    /// The selected set so far this round, as every node sees it.
    pub fn round_selection(&self) -> &[usize] {
        &self.nodes[0].selected_view
    }

    pub fn run_stage(
        &mut self,
        stage: usize,
        objective: &dyn Objective,
        rng: &mut SimRng,
    ) -> Result<StageOutcome> {
        let NetParams {
            n,
            alpha,
            gamma,
            eta,
            n_estimate,
            ..
        } = self.params;
        self.fabric.set_position(self.round, stage);

        let mut reruns = 0u64;
        let mut activations = 0u64;
        let winner = loop {
            let mut active: Vec<(usize, u64)> = Vec::new();
            for v in 0..n {
                let node = &self.nodes[v];
                let rate =
                    alpha * rho(node.weights[stage], node.normalizers[stage], gamma, n_estimate);
                let r = unit_draw(rng);
                let x = poisson_inverse_cdf(rate, r)?;
                if x >= 1 {
                    active.push((v, x));
                }
            }
            if active.is_empty() {
                // Timeout: resample. Costs no messages.
                reruns += 1;
                if reruns >= MAX_RERUNS_PER_STAGE {
                    return Err(Error::Contract("stage rerun budget exhausted".into()));
                }
                continue;
            }
            for &(v, _) in &active {
                self.fabric.broadcast(v, MessageKind::SampledAnnounce)?;
                self.fabric.stats.record_activation(false);
            }
            activations += active.len() as u64;
            // The minimum-id activator coordinates the selection.
            let coordinator = active[0].0;
            let counts: Vec<f64> = active.iter().map(|&(_, x)| x as f64).collect();
            let r = unit_draw(rng);
            let idx = pick_proportional(&counts, r).expect("counts are positive");
            let winner = active[idx].0;
            self.fabric.broadcast(coordinator, MessageKind::Select)?;
            break winner;
        };

        // The winner observes the objective on its local view and shares the
        // weight delta.
        let view = self.nodes[winner].selected_view.clone();
        let before = evaluate(objective, &view)?;
        let mut extended = view;
        insert_sorted(&mut extended, winner);
        let after = evaluate(objective, &extended)?;
        let reward = (after - before).clamp(0.0, 1.0);

        let w = self.nodes[winner].weights[stage];
        let z = self.nodes[winner].normalizers[stage];
        let p_used = rho(w, z, gamma, n_estimate);
        let exponent = checked_exponent(eta, reward, p_used)?;
        let delta = w * (exponent.exp() - 1.0);
        self.fabric.broadcast(winner, MessageKind::WeightUpdate)?;

        self.nodes[winner].weights[stage] += delta;
        let mut renorm = false;
        for node in &mut self.nodes {
            node.normalizers[stage] += delta;
            insert_sorted(&mut node.selected_view, winner);
            if node.normalizers[stage] > RENORM_THRESHOLD {
                renorm = true;
            }
        }
        if renorm {
            // Every node applies the same deterministic rescale to identical
            // state, so coherence is preserved without any messages. Cold
            // weights are floored so repeated rescales cannot zero them out
            // (a multiplicative update can never revive an exact zero).
            for node in &mut self.nodes {
                node.weights[stage] = (node.weights[stage] / RENORM_FACTOR).max(1e-300);
                node.normalizers[stage] /= RENORM_FACTOR;
            }
        }

        Ok(StageOutcome {
            selected: Some(winner),
            activations,
            boosted_activations: 0,
            reruns,
        })
    }
}

// ---------------------------------------------------------------------------
// Star model
// ---------------------------------------------------------------------------

/// Server-side state: the true normalizer per stage plus the round's selected
/// set. Its persistent footprint is a function of the stage count only, never
/// of the number of sensors.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub normalizers: Vec<f64>,
    round_selected: Vec<usize>,
}

impl ServerState {
    /// Number of scalars the server keeps across rounds.
    pub fn persistent_scalars(&self) -> usize {
        self.normalizers.len()
    }
}

/// How a star-network stage resolves when nothing is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarStageMode {
    /// Server messages every sensor to rerun until someone is selected.
    Rerun,
    /// The stage simply ends with no selection.
    NoRerun,
    /// Rerun semantics plus observation-dependent threshold activation.
    ObservationDependent,
}

/// Configuration of the observation-dependent threshold game.
#[derive(Debug, Clone)]
pub struct OdDogParams {
    pub thresholds: Vec<f64>,
    /// Per-sensor activation cost.
    pub costs: Vec<f64>,
    pub wmr_eta: f64,
}

struct Report {
    id: usize,
    draw: f64,
    weight: f64,
    /// Fired by the threshold rule.
    boosted: bool,
    /// Fired by the plain lazy rule.
    lazy: bool,
    /// Baseline lazy activation probability at decision time.
    base_prob: f64,
}

/// Star network: sensors exchange messages only with the base station, which
/// evaluates the objective, resolves lazy activations against the true
/// normalizer, and refreshes every participant with a single reply.
#[derive(Debug)]
pub struct StarNetwork {
    params: NetParams,
    pub nodes: Vec<SensorNode>,
    pub server: ServerState,
    pub fabric: Fabric,
    oddog: Option<OdDogParams>,
    round: u64,
}

impl StarNetwork {
    pub fn new(params: NetParams, oddog: Option<OdDogParams>, collect_trace: bool) -> Result<Self> {
        params.validate()?;
        let mut nodes: Vec<SensorNode> = (0..params.n)
            .map(|id| SensorNode::new(id, params.stages, params.n))
            .collect();
        if let Some(od) = &oddog {
            if od.costs.len() != params.n {
                return Err(Error::Config(format!(
                    "need {} activation costs, got {}",
                    params.n,
                    od.costs.len()
                )));
            }
            for node in &mut nodes {
                node.activation_cost = od.costs[node.id];
                node.wmr = (0..params.stages)
                    .map(|_| WmrState::new(od.thresholds.clone(), od.wmr_eta))
                    .collect::<Result<_>>()?;
            }
        }
        Ok(Self {
            params,
            nodes,
            server: ServerState {
                normalizers: vec![params.n as f64; params.stages],
                round_selected: Vec::new(),
            },
            fabric: Fabric::new(NetworkKind::Star, collect_trace),
            oddog,
            round: 0,
        })
    }

    pub fn params(&self) -> NetParams {
        self.params
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn begin_round(&mut self) {
        self.fabric.stats.begin_round();
        self.server.round_selected.clear();
    }

    pub fn end_round(&mut self) {
        self.fabric.stats.end_round();
        self.round += 1;
    }

    /// The set selected so far this round (server-side view).
    pub fn round_selection(&self) -> &[usize] {
        &self.server.round_selected
    }

    fn rerun_notices(&mut self, reruns: &mut u64) -> Result<()> {
        for v in 0..self.params.n {
            self.fabric
                .unicast(Endpoint::Server, Endpoint::Sensor(v), MessageKind::RerunNotice)?;
        }
        *reruns += 1;
        if *reruns >= MAX_RERUNS_PER_STAGE {
            return Err(Error::Contract("stage rerun budget exhausted".into()));
        }
        Ok(())
    }

    pub fn run_stage(
        &mut self,
        stage: usize,
        objective: &dyn Objective,
        mode: StarStageMode,
        rng: &mut SimRng,
    ) -> Result<StageOutcome> {
        let NetParams {
            n,
            alpha,
            gamma,
            eta,
            n_estimate,
            ..
        } = self.params;
        self.fabric.set_position(self.round, stage);
        let observation_dependent = mode == StarStageMode::ObservationDependent;
        if observation_dependent && self.oddog.is_none() {
            return Err(Error::Config(
                "observation-dependent mode needs threshold parameters".into(),
            ));
        }
        let rerun_on_empty = mode != StarStageMode::NoRerun;

        // Local estimates and threshold choices are made once per stage; the
        // selected set cannot change within a stage, so reruns reuse them.
        let base_value = evaluate(objective, &self.server.round_selected)?;
        let mut estimates = vec![0.0f64; n];
        let mut tau = vec![0.0f64; n];
        if observation_dependent {
            for v in 0..n {
                let mut extended = self.server.round_selected.clone();
                insert_sorted(&mut extended, v);
                estimates[v] = (evaluate(objective, &extended)? - base_value).clamp(0.0, 1.0);
                let idx = self.nodes[v].wmr[stage].select_threshold(rng);
                tau[v] = self.nodes[v].wmr[stage].thresholds()[idx];
            }
        }

        let mut reruns = 0u64;
        let mut stage_activations = 0u64;
        let mut stage_boosted = 0u64;
        let selected = loop {
            // Sensor side: conservative activation decisions.
            let mut reports: Vec<Report> = Vec::new();
            for v in 0..n {
                let node = &self.nodes[v];
                let view = LazySensorView {
                    weight: node.weights[stage],
                    z_estimate: node.normalizers[stage],
                };
                let r = unit_draw(rng);
                let lazy = lazy_activation_decision(view, gamma, n_estimate, alpha, r);
                let boosted = observation_dependent && estimates[v] >= tau[v];
                if lazy || boosted {
                    reports.push(Report {
                        id: v,
                        draw: r,
                        weight: view.weight,
                        boosted,
                        lazy,
                        base_prob: (alpha * rho(view.weight, view.z_estimate, gamma, n_estimate))
                            .min(1.0),
                    });
                }
            }
            for report in &reports {
                self.fabric.unicast(
                    Endpoint::Sensor(report.id),
                    Endpoint::Server,
                    MessageKind::ActivationReport,
                )?;
                let extra = report.boosted && !report.lazy;
                self.fabric.stats.record_activation(extra);
                stage_activations += 1;
                stage_boosted += u64::from(extra);
            }

            if reports.is_empty() {
                if !rerun_on_empty {
                    break None;
                }
                self.rerun_notices(&mut reruns)?;
                continue;
            }

            // Server side: recover the draws the sensors would have made with
            // the true normalizer.
            let z_true = self.server.normalizers[stage];
            let mut counts = Vec::with_capacity(reports.len());
            for report in &reports {
                let rate = alpha * rho(report.weight, z_true, gamma, n_estimate);
                counts.push(poisson_inverse_cdf(rate, report.draw)? as f64);
            }

            // Observation-dependent selection: reported local estimates are
            // exploited directly; when every sensor activates this reproduces
            // the offline greedy choice. Otherwise the selection stays
            // proportional to the recovered counts.
            let boosted_pick = if observation_dependent {
                reports
                    .iter()
                    .filter(|rep| rep.boosted && !self.server.round_selected.contains(&rep.id))
                    .max_by(|a, b| {
                        estimates[a.id]
                            .partial_cmp(&estimates[b.id])
                            .expect("estimates are finite")
                            .then(b.id.cmp(&a.id)) // minimum id wins ties
                    })
                    .map(|rep| rep.id)
            } else {
                None
            };
            let winner = boosted_pick.or_else(|| {
                if counts.iter().all(|&y| y == 0.0) {
                    None
                } else {
                    let r = unit_draw(rng);
                    pick_proportional(&counts, r).map(|idx| reports[idx].id)
                }
            });

            let Some(winner) = winner else {
                // Nothing selected: refresh the participants anyway, then
                // either give up or trigger a rerun.
                for report in &reports {
                    self.fabric.unicast(
                        Endpoint::Server,
                        Endpoint::Sensor(report.id),
                        MessageKind::ServerReply,
                    )?;
                    self.nodes[report.id].normalizers[stage] = z_true;
                }
                self.play_threshold_game(stage, &reports, &estimates)?;
                if !rerun_on_empty {
                    break None;
                }
                self.rerun_notices(&mut reruns)?;
                continue;
            };

            let mut extended = self.server.round_selected.clone();
            insert_sorted(&mut extended, winner);
            let reward = (evaluate(objective, &extended)? - base_value).clamp(0.0, 1.0);
            let winner_report = reports.iter().find(|r| r.id == winner).expect("winner reported");
            // Importance weight: a threshold-driven activation happened with
            // probability one; the baseline path keeps its multinomial mass.
            let p_used = if winner_report.boosted {
                1.0
            } else {
                rho(winner_report.weight, z_true, gamma, n_estimate)
            };
            let exponent = checked_exponent(eta, reward, p_used)?;
            let new_weight = winner_report.weight * exponent.exp();
            let z_new = z_true + (new_weight - winner_report.weight);
            if z_new > STAR_NORMALIZER_LIMIT {
                return Err(Error::Contract(
                    "star normalizer overflow: shorten the run or lower eta".into(),
                ));
            }
            self.server.normalizers[stage] = z_new;
            self.server.round_selected = extended;
            for report in &reports {
                self.fabric.unicast(
                    Endpoint::Server,
                    Endpoint::Sensor(report.id),
                    MessageKind::ServerReply,
                )?;
                self.nodes[report.id].normalizers[stage] = z_new;
                if report.id == winner {
                    self.nodes[report.id].weights[stage] = new_weight;
                }
            }
            self.play_threshold_game(stage, &reports, &estimates)?;
            break Some(winner);
        };

        Ok(StageOutcome {
            selected,
            activations: stage_activations,
            boosted_activations: stage_boosted,
            reruns,
        })
    }

    /// One iteration of the threshold game: every activated sensor updates
    /// its per-stage learner with the counterfactual payoff of each
    /// threshold, importance-weighted by the activation probability that
    /// threshold would have induced.
    fn play_threshold_game(&mut self, stage: usize, activated: &[Report], estimates: &[f64]) -> Result<()> {
        let thresholds = match &self.oddog {
            Some(od) => od.thresholds.clone(),
            None => return Ok(()),
        };
        for (idx, report) in activated.iter().enumerate() {
            let own = estimates[report.id];
            let best_other = activated
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != idx)
                .map(|(_, other)| estimates[other.id])
                .fold(0.0f64, f64::max);
            let cost = self.nodes[report.id].activation_cost;
            let mut rewards = Vec::with_capacity(thresholds.len());
            let mut probs = Vec::with_capacity(thresholds.len());
            for &t in &thresholds {
                rewards.push(crate::bandit::threshold_reward(own, best_other, cost, own, t));
                // Total activation probability conditioned on this threshold:
                // certain when the estimate clears it, baseline otherwise.
                probs.push(if own >= t { 1.0 } else { report.base_prob });
            }
            self.nodes[report.id].wmr[stage].update(&rewards, &probs, true)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::CoverageObjective;
    use crate::rng::rng_from_seed;

    fn unit_params(n: usize, stages: usize) -> NetParams {
        NetParams {
            n,
            stages,
            alpha: 1.0,
            gamma: 0.1,
            eta: 0.1 / n as f64,
            n_estimate: n as f64,
        }
    }

    fn small_objective(n: usize) -> CoverageObjective {
        CoverageObjective::random_grid(n, 4, 0.35, 99)
    }

    #[test]
    fn fabric_enforces_model_rules() {
        let mut broadcast = Fabric::new(NetworkKind::Broadcast, false);
        broadcast.broadcast(0, MessageKind::Select).unwrap();
        assert_eq!(broadcast.stats.current_round().broadcasts, 1);
        assert!(matches!(
            broadcast.unicast(Endpoint::Sensor(0), Endpoint::Server, MessageKind::ActivationReport),
            Err(Error::ModelViolation(_))
        ));

        let mut star = Fabric::new(NetworkKind::Star, false);
        assert!(matches!(
            star.broadcast(0, MessageKind::Select),
            Err(Error::ModelViolation(_))
        ));
        star.unicast(Endpoint::Sensor(1), Endpoint::Server, MessageKind::ActivationReport)
            .unwrap();
        star.unicast(Endpoint::Server, Endpoint::Sensor(1), MessageKind::ServerReply)
            .unwrap();
        assert_eq!(star.stats.current_round().unicasts, 2);
        assert!(matches!(
            star.unicast(Endpoint::Sensor(0), Endpoint::Sensor(1), MessageKind::ServerReply),
            Err(Error::ModelViolation(_))
        ));
    }

    #[test]
    fn message_stats_history_sums_to_totals() {
        let mut stats = MessageStats::default();
        for i in 0..5u64 {
            stats.begin_round();
            for _ in 0..=i {
                stats.record_broadcast();
                stats.record_activation(i % 2 == 0);
            }
            stats.end_round();
        }
        let mut summed = RoundStats::default();
        for r in stats.history() {
            summed.add(r);
        }
        assert_eq!(summed, stats.totals());
        assert_eq!(stats.history().len(), 5);
    }

    #[test]
    fn single_sensor_stage_costs_three_broadcasts() {
        // One sensor: it is the sole activator, coordinator and winner, so a
        // stage is exactly sampled-announce + select + weight-update.
        let objective = CoverageObjective::unit_cells(2, vec![vec![0, 1]]).unwrap();
        let mut net = BroadcastNetwork::new(unit_params(1, 1), true).unwrap();
        let mut rng = rng_from_seed(5);
        net.begin_round();
        let out = net.run_stage(0, &objective, &mut rng).unwrap();
        net.end_round();
        assert_eq!(out.selected, Some(0));
        assert_eq!(net.fabric.stats.broadcasts(), 3);
        let trace = net.fabric.trace().unwrap();
        let kinds: Vec<_> = trace.iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![MessageKind::SampledAnnounce, MessageKind::Select, MessageKind::WeightUpdate]
        );
    }

    #[test]
    fn broadcast_stage_message_accounting() {
        // Broadcasts per stage are always activations + 2, and a k-stage
        // round carries exactly k weight-update broadcasts.
        let n = 6;
        let k = 2;
        let objective = small_objective(n);
        let mut net = BroadcastNetwork::new(unit_params(n, k), true).unwrap();
        let mut rng = rng_from_seed(11);
        for round in 0..50u64 {
            net.begin_round();
            for stage in 0..k {
                let before = net.fabric.stats.current_round();
                let out = net.run_stage(stage, &objective, &mut rng).unwrap();
                let after = net.fabric.stats.current_round();
                assert_eq!(after.broadcasts - before.broadcasts, out.activations + 2);
                assert!(out.selected.is_some());
            }
            net.end_round();
            let updates = net
                .fabric
                .trace()
                .unwrap()
                .iter()
                .filter(|e| e.round == round && e.kind == MessageKind::WeightUpdate)
                .count();
            assert_eq!(updates, k);
        }

        // A round that runs no stages leaves the statistics unchanged.
        let totals = net.fabric.stats.totals();
        net.begin_round();
        net.end_round();
        assert_eq!(net.fabric.stats.totals(), totals);
    }

    #[test]
    fn renormalization_keeps_coherence_and_positive_weights() {
        // Aggressive learning drives the normalizer past the renorm
        // threshold many times; nodes must stay bit-identical and no weight
        // may collapse to zero.
        let n = 6;
        let objective = small_objective(n);
        let params = NetParams {
            n,
            stages: 1,
            alpha: 1.0,
            gamma: 0.5,
            eta: 2.0,
            n_estimate: n as f64,
        };
        let mut net = BroadcastNetwork::new(params, false).unwrap();
        let mut rng = rng_from_seed(71);
        for _ in 0..3000 {
            net.begin_round();
            net.run_stage(0, &objective, &mut rng).unwrap();
            net.end_round();
            let z0 = net.nodes[0].normalizers[0];
            assert!(z0.is_finite() && z0 <= RENORM_THRESHOLD);
            for node in &net.nodes {
                assert_eq!(node.normalizers[0].to_bits(), z0.to_bits());
                assert!(node.weights[0] > 0.0, "weight collapsed to zero");
            }
        }
    }

    #[test]
    fn broadcast_normalizers_stay_bit_identical() {
        let n = 8;
        let objective = small_objective(n);
        let mut net = BroadcastNetwork::new(unit_params(n, 3), false).unwrap();
        let mut rng = rng_from_seed(23);
        for _ in 0..100 {
            net.begin_round();
            for stage in 0..3 {
                net.run_stage(stage, &objective, &mut rng).unwrap();
                let z0 = net.nodes[0].normalizers[stage];
                for node in &net.nodes {
                    assert_eq!(node.normalizers[stage].to_bits(), z0.to_bits());
                }
            }
            net.end_round();
        }
        // Normalizers track the actual weight sums.
        for stage in 0..3 {
            let z = net.nodes[0].normalizers[stage];
            let sum: f64 = net.nodes.iter().map(|nd| nd.weights[stage]).sum();
            assert!((z - sum).abs() <= 1e-9 * z.abs());
        }
    }

    #[test]
    fn star_lazy_estimates_never_exceed_truth() {
        let n = 10;
        let objective = small_objective(n);
        let mut net = StarNetwork::new(unit_params(n, 2), None, false).unwrap();
        let mut rng = rng_from_seed(31);
        for _ in 0..200 {
            net.begin_round();
            for stage in 0..2 {
                net.run_stage(stage, &objective, StarStageMode::Rerun, &mut rng)
                    .unwrap();
                let z_true = net.server.normalizers[stage];
                for node in &net.nodes {
                    assert!(
                        node.normalizers[stage] <= z_true + 1e-12,
                        "stale estimate above the true normalizer"
                    );
                    assert!(node.normalizers[stage] >= n as f64);
                }
            }
            net.end_round();
        }
    }

    #[test]
    fn star_messages_are_twice_activations_plus_rerun_notices() {
        let n = 12;
        let objective = small_objective(n);
        let mut net = StarNetwork::new(unit_params(n, 1), None, false).unwrap();
        let mut rng = rng_from_seed(41);
        let mut total_reruns = 0u64;
        for _ in 0..300 {
            net.begin_round();
            let out = net.run_stage(0, &objective, StarStageMode::Rerun, &mut rng).unwrap();
            net.end_round();
            total_reruns += out.reruns;
            assert!(out.selected.is_some());
        }
        let stats = net.fabric.stats.totals();
        assert_eq!(stats.unicasts, 2 * stats.activations + total_reruns * n as u64);
    }

    #[test]
    fn star_no_rerun_allows_empty_stages() {
        let n = 8;
        let objective = small_objective(n);
        let mut net = StarNetwork::new(
            NetParams {
                alpha: 0.2, // high no-selection probability
                ..unit_params(n, 1)
            },
            None,
            false,
        )
        .unwrap();
        let mut rng = rng_from_seed(53);
        let mut empties = 0u64;
        let mut selected = 0u64;
        for _ in 0..400 {
            net.begin_round();
            let out = net.run_stage(0, &objective, StarStageMode::NoRerun, &mut rng).unwrap();
            let round = net.fabric.stats.current_round();
            net.end_round();
            assert_eq!(out.reruns, 0);
            match out.selected {
                None => {
                    empties += 1;
                    if out.activations == 0 {
                        // An entirely silent stage costs zero messages.
                        assert_eq!(round.unicasts, 0);
                    }
                }
                Some(_) => selected += 1,
            }
        }
        assert!(empties > 0, "alpha = 0.2 should fail sometimes");
        assert!(selected > 0);
    }

    #[test]
    fn server_footprint_is_independent_of_n() {
        for n in [4usize, 16, 64] {
            let net = StarNetwork::new(unit_params(n, 3), None, false).unwrap();
            assert_eq!(net.server.persistent_scalars(), 3);
        }
    }
}
