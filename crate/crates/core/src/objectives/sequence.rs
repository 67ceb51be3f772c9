//! Per-round objective sequences `f_1, ..., f_T`.

use std::sync::Arc;

use super::{Objective, SensorUniverse};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use rand::Rng;

/// How the objective for round `t` is chosen from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceMode {
    /// One fixed objective every round.
    Constant,
    /// Cycle through the pool in order.
    Cyclic,
    /// Seeded independent draw per round.
    RandomDraw { seed: u64 },
}

/// A deterministic function from round index to objective.
#[derive(Clone)]
pub struct ObjectiveSequence {
    objectives: Vec<Arc<dyn Objective>>,
    mode: SequenceMode,
}

impl ObjectiveSequence {
    pub fn new(objectives: Vec<Arc<dyn Objective>>, mode: SequenceMode) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::Config("objective pool is empty".into()));
        }
        let n = objectives[0].universe().len();
        if objectives.iter().any(|o| o.universe().len() != n) {
            return Err(Error::Config("all objectives must share one universe".into()));
        }
        if matches!(mode, SequenceMode::Constant) && objectives.len() != 1 {
            return Err(Error::Config("constant mode takes exactly one objective".into()));
        }
        Ok(Self { objectives, mode })
    }

    pub fn constant(objective: Arc<dyn Objective>) -> Self {
        Self::new(vec![objective], SequenceMode::Constant).expect("single objective")
    }

    pub fn universe(&self) -> SensorUniverse {
        self.objectives[0].universe()
    }

    pub fn pool(&self) -> &[Arc<dyn Objective>] {
        &self.objectives
    }

    pub fn mode(&self) -> SequenceMode {
        self.mode
    }

    /// Pool index active at round `t`; deterministic given the mode and seed.
    pub fn index_at(&self, t: u64) -> usize {
        match self.mode {
            SequenceMode::Constant => 0,
            SequenceMode::Cyclic => (t % self.objectives.len() as u64) as usize,
            SequenceMode::RandomDraw { seed } => {
                let mut rng = stream_rng(seed, t);
                rng.random_range(0..self.objectives.len())
            }
        }
    }

    pub fn objective_at(&self, t: u64) -> &Arc<dyn Objective> {
        &self.objectives[self.index_at(t)]
    }

    /// How many of the first `rounds` rounds each pool member serves.
    pub fn occurrence_counts(&self, rounds: u64) -> Vec<u64> {
        let mut counts = vec![0u64; self.objectives.len()];
        match self.mode {
            SequenceMode::Constant => counts[0] = rounds,
            SequenceMode::Cyclic => {
                let m = self.objectives.len() as u64;
                for (i, c) in counts.iter_mut().enumerate() {
                    *c = rounds / m + u64::from((i as u64) < rounds % m);
                }
            }
            SequenceMode::RandomDraw { .. } => {
                for t in 0..rounds {
                    counts[self.index_at(t)] += 1;
                }
            }
        }
        counts
    }
}
