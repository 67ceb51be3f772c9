//! Distributed one-of-n sampling protocols.
//!
//! Three protocols select at most one sensor from a probability vector with
//! each sensor deciding to activate on its own:
//!
//! - [`simple_protocol`]: Bernoulli activation, uniform choice among the
//!   active set. Preserves each mass only up to a factor in `[1/2, 1]`.
//! - [`improved_protocol`]: binomial counts equalize the distortion ratio
//!   across sensors whenever every mass is a multiple of `1/N`.
//! - [`pms_protocol`]: the `N -> ∞` limit. Each sensor draws
//!   `X_v ~ Poisson(α p_v)` and the selection among active sensors is
//!   proportional to the draws, which yields `P{v selected} =
//!   (1 - e^{-α}) p_v` exactly and at most `α` activations in expectation.
//!
//! Poisson draws are made by inverting a single uniform through the CDF
//! ([`poisson_inverse_cdf`]). The star-network lazy-renormalization path
//! reuses that inversion: a sensor activates conservatively from its stale
//! normalizer estimate ([`lazy_activation_decision`]) and the server recovers
//! the draw the sensor would have made with the true normalizer
//! ([`server_resolve`]), so activation always covers the event `Y_v >= 1`.

use crate::error::{Error, Result};
use crate::rng::{pick_proportional, unit_draw, SimRng};

/// Largest Poisson mean supported by the compensated CDF summation.
pub const MAX_POISSON_MEAN: f64 = 64.0;

const SIMPLEX_TOL: f64 = 1e-9;

/// One sensor that activated during a protocol invocation, with its sampled
/// count (1 for Bernoulli-style activation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActivatedSensor {
    pub id: usize,
    pub draw: u64,
}

/// Result of one protocol invocation.
///
/// `messages` counts one message per sensor activation (the activation
/// announcement); selection/update traffic on top of this is accounted by the
/// network simulation. `reruns` counts failed invocations before the
/// successful one in the rerun-until-selected wrapper.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingOutcome {
    pub selected: Option<usize>,
    pub activated: Vec<ActivatedSensor>,
    pub messages: u64,
    pub reruns: u64,
}

impl SamplingOutcome {
    pub fn activations(&self) -> u64 {
        self.activated.len() as u64
    }
}

fn validate_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution("empty distribution".into()));
    }
    let mut sum = 0.0;
    for (i, &x) in p.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::InvalidDistribution(format!("p[{i}] = {x}")));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidDistribution(format!("masses sum to {sum}, not 1")));
    }
    Ok(())
}

fn select_among(active: &[ActivatedSensor], rng: &mut SimRng) -> Option<usize> {
    if active.is_empty() {
        return None;
    }
    let counts: Vec<f64> = active.iter().map(|a| a.draw as f64).collect();
    let r = unit_draw(rng);
    pick_proportional(&counts, r).map(|idx| active[idx].id)
}

/// Each sensor activates independently with its own mass; one of the active
/// sensors is then chosen uniformly at random.
pub fn simple_protocol(p: &[f64], rng: &mut SimRng) -> Result<SamplingOutcome> {
    validate_simplex(p)?;
    let mut activated = Vec::new();
    for (v, &mass) in p.iter().enumerate() {
        if unit_draw(rng) < mass {
            activated.push(ActivatedSensor { id: v, draw: 1 });
        }
    }
    let selected = select_among(&activated, rng);
    let messages = activated.len() as u64;
    Ok(SamplingOutcome {
        selected,
        activated,
        messages,
        reruns: 0,
    })
}

/// Binomial refinement: `X_v ~ Binomial(ceil(N p_v), 1/N)`, activation on
/// `X_v >= 1`, selection proportional to the counts.
pub fn improved_protocol(p: &[f64], n_grain: u64, rng: &mut SimRng) -> Result<SamplingOutcome> {
    validate_simplex(p)?;
    if n_grain == 0 {
        return Err(Error::Contract("grain N must be at least 1".into()));
    }
    let mut activated = Vec::new();
    for (v, &mass) in p.iter().enumerate() {
        let trials = (n_grain as f64 * mass).ceil() as u64;
        let q = 1.0 / n_grain as f64;
        let mut x = 0u64;
        for _ in 0..trials {
            if unit_draw(rng) < q {
                x += 1;
            }
        }
        if x >= 1 {
            activated.push(ActivatedSensor { id: v, draw: x });
        }
    }
    let selected = select_among(&activated, rng);
    let messages = activated.len() as u64;
    Ok(SamplingOutcome {
        selected,
        activated,
        messages,
        reruns: 0,
    })
}

/// Poisson multinomial sampling: `X_v ~ Poisson(α p_v)` via CDF inversion,
/// activation on `X_v >= 1`, selection proportional to the counts.
pub fn pms_protocol(p: &[f64], alpha: f64, rng: &mut SimRng) -> Result<SamplingOutcome> {
    validate_simplex(p)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Contract(format!("alpha {alpha} must be positive")));
    }
    let mut activated = Vec::new();
    for (v, &mass) in p.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let r = unit_draw(rng);
        let x = poisson_inverse_cdf(alpha * mass, r)?;
        if x >= 1 {
            activated.push(ActivatedSensor { id: v, draw: x });
        }
    }
    let selected = select_among(&activated, rng);
    let messages = activated.len() as u64;
    Ok(SamplingOutcome {
        selected,
        activated,
        messages,
        reruns: 0,
    })
}

/// Rerun [`pms_protocol`] with fresh randomness until a sensor is selected.
///
/// The selection law renormalizes to `p` exactly. Failed attempts activate
/// nobody, so the expected total number of activations stays below
/// `α / (1 - e^{-α})`.
pub fn pms_until_selected(p: &[f64], alpha: f64, rng: &mut SimRng) -> Result<SamplingOutcome> {
    const MAX_RERUNS: u64 = 1_000_000;
    let mut reruns = 0u64;
    let mut messages = 0u64;
    loop {
        let outcome = pms_protocol(p, alpha, rng)?;
        messages += outcome.messages;
        if outcome.selected.is_some() {
            return Ok(SamplingOutcome {
                selected: outcome.selected,
                activated: outcome.activated,
                messages,
                reruns,
            });
        }
        reruns += 1;
        if reruns >= MAX_RERUNS {
            return Err(Error::Contract(
                "rerun budget exhausted without a selection".into(),
            ));
        }
    }
}

/// `min { x : P(Poisson(λ) <= x) >= r }`, by compensated cumulative pmf
/// summation.
///
/// Monotone nondecreasing in `r`; rejects `λ` outside `(0, 64]` and `r`
/// outside `[0, 1)`.
pub fn poisson_inverse_cdf(lambda: f64, r: f64) -> Result<u64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Contract(format!("lambda {lambda} must be positive")));
    }
    if lambda > MAX_POISSON_MEAN {
        return Err(Error::Contract(format!(
            "lambda {lambda} exceeds supported maximum {MAX_POISSON_MEAN}"
        )));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Contract(format!("r {r} must lie in [0, 1)")));
    }
    let mut pmf = (-lambda).exp();
    let mut cum = pmf;
    let mut comp = 0.0f64; // Kahan compensation
    let mut k = 0u64;
    while cum < r {
        k += 1;
        pmf *= lambda / k as f64;
        let y = pmf - comp;
        let t = cum + y;
        comp = (t - cum) - y;
        cum = t;
        if pmf < 1e-300 && cum < r {
            // Tail mass below representable resolution; r is closer to 1
            // than the CDF can be distinguished from it.
            break;
        }
    }
    Ok(k)
}

/// Exploration-mixed mass `ρ(x, y) = (1-γ) x/y + γ/n`.
pub fn rho(weight: f64, normalizer: f64, gamma: f64, n: f64) -> f64 {
    (1.0 - gamma) * weight / normalizer + gamma / n
}

/// A sensor's lazy view of one bandit instance: its own weight and its stale
/// lower-bound estimate of the normalizer.
#[derive(Debug, Clone, Copy)]
pub struct LazySensorView {
    pub weight: f64,
    pub z_estimate: f64,
}

/// Conservative activation test for the lazy star-network protocol: activate
/// iff `r >= 1 - α ρ(w, Ẑ)`.
///
/// With `Ẑ <= Z` this threshold is below `e^{-α ρ(w, Z)}`, so every draw that
/// yields a positive server-side count also activates (coupling soundness).
pub fn lazy_activation_decision(
    view: LazySensorView,
    gamma: f64,
    n: f64,
    alpha: f64,
    r: f64,
) -> bool {
    r >= 1.0 - alpha * rho(view.weight, view.z_estimate, gamma, n)
}

/// Activation report sent to the server: the sensor's shared uniform draw and
/// its current weight.
#[derive(Debug, Clone, Copy)]
pub struct ActivationReport {
    pub id: usize,
    pub draw: f64,
    pub weight: f64,
}

/// Selected sensor (if any) and the per-sensor recovered counts.
pub type ServerResolution = (Option<usize>, Vec<(usize, u64)>);

/// Server-side resolution of one lazy sampling step.
///
/// For each active sensor the server recovers `Y_v =`
/// [`poisson_inverse_cdf`]`(α ρ(w_v, Z), r_v)` from the shared draw and the
/// true normalizer; sensors with `Y_v = 0` are ignored and one of the rest is
/// selected proportionally to `Y_v`. Returns the selected id (if any) and the
/// per-sensor counts.
pub fn server_resolve(
    active: &[ActivationReport],
    true_z: f64,
    gamma: f64,
    n: f64,
    alpha: f64,
    rng: &mut SimRng,
) -> Result<ServerResolution> {
    if !(true_z > 0.0 && true_z.is_finite()) {
        return Err(Error::Contract(format!("normalizer {true_z} must be positive")));
    }
    let mut counts = Vec::with_capacity(active.len());
    for report in active {
        let lambda = alpha * rho(report.weight, true_z, gamma, n);
        let y = poisson_inverse_cdf(lambda, report.draw)?;
        counts.push((report.id, y));
    }
    let weights: Vec<f64> = counts.iter().map(|&(_, y)| y as f64).collect();
    let selected = if weights.iter().all(|&y| y == 0.0) {
        None
    } else {
        let r = unit_draw(rng);
        pick_proportional(&weights, r).map(|idx| counts[idx].0)
    };
    Ok((selected, counts))
}
