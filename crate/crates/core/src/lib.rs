//! Online distributed sensor selection.
//!
//! This crate implements the full pipeline for selecting `k` of `n` sensors
//! every round against an unknown, changing submodular reward:
//!
//! - [`objectives`] — synthetic monotone submodular objectives (coverage,
//!   target detection, Gaussian EMSE reduction) plus a brute-force
//!   monotonicity/submodularity checker.
//! - [`bandit`] — adversarial bandit primitives: EXP3 with importance-weighted
//!   updates and the modified weighted-majority threshold learner.
//! - [`sampling`] — distributed one-of-n sampling protocols (simple,
//!   improved, Poisson multinomial) and lazy-renormalization activation with
//!   shared-randomness coupling.
//! - [`netsim`] — simulated broadcast and star networks with exact message
//!   and activation accounting.
//! - [`algorithms`] — offline greedy, brute-force optimum, the OG-unit
//!   meta-algorithm, and the DOG / lazyDOG / OD-DOG runners, plus regret
//!   reporting.
//! - [`stats`] — chi-square goodness of fit and the small statistical
//!   helpers the Monte Carlo checks rely on.
//!
//! Everything is deterministic given a seed: all randomness flows through an
//! explicit [`rng::SimRng`].
//!
//! ```
//! use std::sync::Arc;
//! use dogsim_core::algorithms::{dog_run, offline_greedy, RunConfig, RunMode};
//! use dogsim_core::objectives::{CoverageObjective, Objective, ObjectiveSequence};
//!
//! let objective = Arc::new(CoverageObjective::random_grid(12, 4, 0.3, 7)) as Arc<dyn Objective>;
//! let greedy = offline_greedy(objective.as_ref(), 2)?;
//! let sequence = ObjectiveSequence::constant(objective);
//! let config = RunConfig::new(12, 2, 200, RunMode::DogBroadcast, 42);
//! let result = dog_run(&config, &sequence)?;
//! assert_eq!(result.records.len(), 200);
//! assert!(result.average_reward() > 0.0);
//! assert_eq!(greedy.len(), 2);
//! # Ok::<(), dogsim_core::Error>(())
//! ```

pub mod algorithms;
pub mod bandit;
pub mod error;
pub mod netsim;
pub mod objectives;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
