//! Centralized adversarial-bandit primitives.
//!
//! [`Exp3State`] is the exponential-weights bandit: it mixes
//! weight-proportional exploitation with uniform exploration and applies
//! importance-weighted multiplicative updates. [`WmrState`] is the randomized
//! weighted-majority learner the observation-dependent algorithm uses to pick
//! activation thresholds.

use crate::error::{Error, Result};
use crate::rng::{pick_proportional, unit_draw, SimRng};

/// Rescale all weights by a common factor once their sum exceeds this.
/// Probabilities are ratios of weights, so rescaling leaves them unchanged.
const RESCALE_THRESHOLD: f64 = 1e100;
const RESCALE_FLOOR: f64 = 1e-100;

/// Smallest weight kept after a rescale. A weight this far below the sum
/// contributes nothing beyond the exploration floor, but letting it reach
/// zero would freeze the arm forever (multiplicative updates cannot revive
/// it).
const WEIGHT_FLOOR: f64 = 1e-300;

/// Largest exponent accepted in a multiplicative update; beyond this the
/// weight ratio is not representable in a linear f64 encoding.
const MAX_UPDATE_EXPONENT: f64 = 600.0;

/// EXP3 bandit state over `n` arms.
#[derive(Debug, Clone)]
pub struct Exp3State {
    weights: Vec<f64>,
    gamma: f64,
    eta: f64,
}

impl Exp3State {
    /// Fresh state with unit weights.
    ///
    /// `gamma` is the exploration probability in `(0, 1]`, `eta` the positive
    /// learning rate.
    pub fn new(n: usize, gamma: f64, eta: f64) -> Result<Self> {
        Self::with_weights(vec![1.0; n], gamma, eta)
    }

    pub fn with_weights(weights: Vec<f64>, gamma: f64, eta: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("need at least one arm".into()));
        }
        let gamma_ok = gamma > 0.0 && gamma <= 1.0;
        if !gamma_ok {
            return Err(Error::Config(format!("gamma {gamma} outside (0, 1]")));
        }
        let eta_ok = eta > 0.0 && eta.is_finite();
        if !eta_ok {
            return Err(Error::Config(format!("eta {eta} must be positive")));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Config("weights must be positive and finite".into()));
        }
        Ok(Self { weights, gamma, eta })
    }

    pub fn arms(&self) -> usize {
        self.weights.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Selection distribution: `p_s = (1-γ) w_s / Σw + γ/n`.
    ///
    /// Every component is at least `γ/n` and the vector sums to one.
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.weights.len() as f64;
        let total: f64 = self.weights.iter().sum();
        self.weights
            .iter()
            .map(|w| (1.0 - self.gamma) * w / total + self.gamma / n)
            .collect()
    }

    /// Draw an arm from the current distribution.
    pub fn sample(&self, rng: &mut SimRng) -> usize {
        let probs = self.probabilities();
        let r = unit_draw(rng);
        pick_proportional(&probs, r).expect("probabilities sum to one")
    }

    /// Importance-weighted update for the selected arm:
    /// `w_arm *= exp(η · reward / p_used)`.
    ///
    /// `p_used` is the probability mass the arm was actually sampled with.
    /// Only the selected arm changes; the state rescales all weights by a
    /// common factor when their sum grows past the overflow guard.
    pub fn update(&mut self, arm: usize, reward: f64, p_used: f64) -> Result<()> {
        if arm >= self.weights.len() {
            return Err(Error::Contract(format!("arm {arm} out of range")));
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::Contract(format!("reward {reward} outside [0, 1]")));
        }
        if !p_used.is_finite() || p_used <= 0.0 {
            return Err(Error::Contract(format!("p_used {p_used} must be positive")));
        }
        let exponent = self.eta * reward / p_used;
        if exponent > MAX_UPDATE_EXPONENT {
            return Err(Error::Contract(format!(
                "update exponent {exponent:.3e} too large for linear weights (p_used too small)"
            )));
        }
        self.weights[arm] *= exponent.exp();
        self.maybe_rescale();
        Ok(())
    }

    fn maybe_rescale(&mut self) {
        let total: f64 = self.weights.iter().sum();
        if !(RESCALE_FLOOR..=RESCALE_THRESHOLD).contains(&total) {
            let c = total / self.weights.len() as f64;
            for w in &mut self.weights {
                *w = (*w / c).max(WEIGHT_FLOOR);
            }
        }
    }
}

/// Default exploration/learning rate from the reward guess `g`:
/// `min(1, sqrt(n ln n / g))`, falling back to 1 when the formula degenerates
/// (n = 1).
pub fn default_rate(n: usize, reward_guess: f64) -> f64 {
    let n_f = n as f64;
    let v = (n_f * n_f.ln() / reward_guess.max(1.0)).sqrt().min(1.0);
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Randomized weighted-majority state over a fixed threshold grid.
#[derive(Debug, Clone)]
pub struct WmrState {
    thresholds: Vec<f64>,
    weights: Vec<f64>,
    eta: f64,
    current_choice: usize,
}

impl WmrState {
    pub fn new(thresholds: Vec<f64>, eta: f64) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Config("threshold grid is empty".into()));
        }
        if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("thresholds must lie in [0, 1]".into()));
        }
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("thresholds must be sorted ascending".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("eta {eta} must be positive")));
        }
        let m = thresholds.len();
        Ok(Self {
            thresholds,
            weights: vec![1.0; m],
            eta,
            current_choice: 0,
        })
    }

    /// Uniform grid `{0, 1/(m-1), ..., 1}`.
    pub fn uniform_grid(m: usize, eta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("threshold grid is empty".into()));
        }
        let thresholds = if m == 1 {
            vec![0.0]
        } else {
            (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
        };
        Self::new(thresholds, eta)
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the threshold in play this round.
    pub fn current_choice(&self) -> usize {
        self.current_choice
    }

    pub fn current_threshold(&self) -> f64 {
        self.thresholds[self.current_choice]
    }

    /// Draw a threshold index proportionally to the weights and remember it.
    pub fn select_threshold(&mut self, rng: &mut SimRng) -> usize {
        let r = unit_draw(rng);
        let idx = pick_proportional(&self.weights, r).expect("weights stay positive");
        self.current_choice = idx;
        idx
    }

    /// Multiplicative update `w(τ_i) *= exp(η ψ(τ_i) / q(τ_i))`, applied only
    /// when the sensor activated this round. In the full-information
    /// (broadcast) setting callers pass `q ≡ 1`.
    pub fn update(&mut self, rewards: &[f64], activation_probs: &[f64], did_activate: bool) -> Result<()> {
        if !did_activate {
            return Ok(());
        }
        let m = self.thresholds.len();
        if rewards.len() != m || activation_probs.len() != m {
            return Err(Error::Contract(format!(
                "expected {m} rewards and activation probabilities"
            )));
        }
        for &q in activation_probs {
            if !q.is_finite() || q <= 0.0 {
                return Err(Error::Contract(format!("activation probability {q} must be positive")));
            }
        }
        for ((w, &psi), &q) in self.weights.iter_mut().zip(rewards).zip(activation_probs) {
            let exponent = self.eta * psi / q;
            if exponent.abs() > MAX_UPDATE_EXPONENT {
                return Err(Error::Contract(format!(
                    "update exponent {exponent:.3e} too large for linear weights"
                )));
            }
            *w *= exponent.exp();
        }
        let total: f64 = self.weights.iter().sum();
        if !(RESCALE_FLOOR..=RESCALE_THRESHOLD).contains(&total) {
            let c = total / m as f64;
            for w in &mut self.weights {
                *w = (*w / c).max(WEIGHT_FLOOR);
            }
        }
        Ok(())
    }
}

/// Payoff of the threshold game for one sensor and one candidate threshold.
///
/// `own_marginal` (π) is the sensor's marginal benefit, `best_other_marginal`
/// (π̄, zero when no other sensor activated), `cost` its activation cost,
/// `local_estimate` (π̂) gates the activation branch against `threshold` (τ):
/// activating earns `max(π - π̄, 0) - c`, staying silent earns the negation.
pub fn threshold_reward(
    own_marginal: f64,
    best_other_marginal: f64,
    cost: f64,
    local_estimate: f64,
    threshold: f64,
) -> f64 {
    let improvement = (own_marginal - best_other_marginal).max(0.0);
    if local_estimate >= threshold {
        improvement - cost
    } else {
        cost - improvement
    }
}
