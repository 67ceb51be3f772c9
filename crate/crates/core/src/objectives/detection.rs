//! Target detection: expected number of detected targets.

use super::{Objective, SensorUniverse};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use rand::{Rng, SeedableRng};

/// Expected fraction of targets detected by the selected sensors.
///
/// Target `t` is missed by a set `S` with probability `prod_{v in S} (1 -
/// q[t][v])`; the objective averages detection probability over all targets,
/// which is monotone submodular. The deterministic expected-count form is the
/// default; [`DetectionObjective::realize`] draws a per-round subset of
/// active targets for stochastic sequences (inactive targets contribute
/// nothing but still count in the normalizer, keeping values in `[0, 1]`).
#[derive(Debug, Clone)]
pub struct DetectionObjective {
    // detect_probs[target][sensor]
    detect_probs: Vec<Vec<f64>>,
    active: Option<Vec<bool>>,
}

impl DetectionObjective {
    pub fn new(detect_probs: Vec<Vec<f64>>) -> Result<Self> {
        if detect_probs.is_empty() {
            return Err(Error::Config("detection needs at least one target".into()));
        }
        let n = detect_probs[0].len();
        if n == 0 {
            return Err(Error::Config("detection needs at least one sensor".into()));
        }
        for row in &detect_probs {
            if row.len() != n {
                return Err(Error::Config("ragged detection probability matrix".into()));
            }
            for &q in row {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::Config(format!("detection probability {q} outside [0,1]")));
                }
            }
        }
        Ok(Self {
            detect_probs,
            active: None,
        })
    }

    /// Random instance: each target is detectable by roughly half the
    /// sensors, with detection probability in [0.2, 0.9].
    pub fn random(n_sensors: usize, n_targets: usize, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let detect_probs = (0..n_targets)
            .map(|_| {
                (0..n_sensors)
                    .map(|_| {
                        if rng.random::<f64>() < 0.5 {
                            0.0
                        } else {
                            0.2 + 0.7 * rng.random::<f64>()
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(detect_probs).expect("generated instance is valid")
    }

    /// Stochastic mode: draw which targets are present this round (each with
    /// probability 1/2), deterministically from `seed`.
    pub fn realize(&self, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let active = (0..self.detect_probs.len())
            .map(|_| rng.random::<f64>() < 0.5)
            .collect();
        Self {
            detect_probs: self.detect_probs.clone(),
            active: Some(active),
        }
    }

    pub fn targets(&self) -> usize {
        self.detect_probs.len()
    }
}

impl Objective for DetectionObjective {
    fn universe(&self) -> SensorUniverse {
        SensorUniverse::new(self.detect_probs[0].len())
    }

    fn value(&self, set: &[usize]) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        let m = self.detect_probs.len() as f64;
        let mut expected = 0.0;
        for (t, row) in self.detect_probs.iter().enumerate() {
            if let Some(active) = &self.active {
                if !active[t] {
                    continue;
                }
            }
            let miss: f64 = set.iter().map(|&v| 1.0 - row[v]).product();
            expected += 1.0 - miss;
        }
        expected / m
    }
}
