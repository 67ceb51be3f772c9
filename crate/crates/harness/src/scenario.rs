//! Scenario files: flat key-value text with one section per concern.
//!
//! Parsing is strict — an unknown section, an unknown key, a key repeated, or
//! a key that does not apply to the chosen family is an error carrying the
//! line number. Example:
//!
//! ```text
//! [objective]
//! family = coverage-grid
//! sensors = 30
//! grid = 10
//! radius = 0.22
//! seed = 7
//!
//! [run]
//! mode = dog
//! k = 3
//! rounds = 20000
//! trials = 10
//! seed = 42
//!
//! [output]
//! csv = out.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dogsim_core::algorithms::{RunConfig, RunMode};
use dogsim_core::objectives::{
    CoverageObjective, DetectionObjective, GaussianEmseObjective, Objective, ObjectiveSequence,
    SequenceMode,
};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveFamily {
    CoverageGrid,
    Detection,
    GaussianOneFactor,
    GaussianEquicorrelated,
    GaussianIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Constant,
    Cyclic,
    Random,
}

/// Objective family, parameters, and pool layout.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub family: ObjectiveFamily,
    pub sensors: usize,
    pub seed: u64,
    pub sequence: SequenceKind,
    /// Number of instances in the pool (cyclic / random sequences).
    pub pool: usize,
    pub grid: usize,
    pub radius: f64,
    pub targets: usize,
    pub rho: f64,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self {
            family: ObjectiveFamily::CoverageGrid,
            sensors: 30,
            seed: 7,
            sequence: SequenceKind::Constant,
            pool: 1,
            grid: 10,
            radius: 0.22,
            targets: 8,
            rho: 0.5,
        }
    }
}

impl ObjectiveSpec {
    fn instance(&self, index: u64) -> Result<Arc<dyn Objective>> {
        let seed = self.seed.wrapping_add(index.wrapping_mul(0x9e3779b9));
        let obj: Arc<dyn Objective> = match self.family {
            ObjectiveFamily::CoverageGrid => Arc::new(CoverageObjective::random_grid(
                self.sensors,
                self.grid,
                self.radius,
                seed,
            )),
            ObjectiveFamily::Detection => {
                // One base instance per scenario; pool members beyond the
                // first are per-round target realizations of it, so cyclic
                // and random sequences model changing target presence rather
                // than unrelated detection problems.
                let base = DetectionObjective::random(self.sensors, self.targets, self.seed);
                if index == 0 {
                    Arc::new(base)
                } else {
                    Arc::new(base.realize(seed))
                }
            }
            ObjectiveFamily::GaussianOneFactor => {
                Arc::new(GaussianEmseObjective::one_factor(self.sensors, seed)?)
            }
            ObjectiveFamily::GaussianEquicorrelated => {
                Arc::new(GaussianEmseObjective::equicorrelated(self.sensors, self.rho)?)
            }
            ObjectiveFamily::GaussianIdentity => {
                Arc::new(GaussianEmseObjective::identity(self.sensors))
            }
        };
        Ok(obj)
    }

    /// Materialize the objective pool as a per-round sequence.
    pub fn build_sequence(&self) -> Result<ObjectiveSequence> {
        let pool: Vec<Arc<dyn Objective>> = (0..self.pool.max(1) as u64)
            .map(|i| self.instance(i))
            .collect::<Result<_>>()?;
        let mode = match self.sequence {
            SequenceKind::Constant if pool.len() == 1 => SequenceMode::Constant,
            SequenceKind::Constant => {
                return Err(HarnessError::Invalid(
                    "constant sequence requires pool = 1".into(),
                ))
            }
            SequenceKind::Cyclic => SequenceMode::Cyclic,
            SequenceKind::Random => SequenceMode::RandomDraw {
                seed: self.seed ^ 0xD06_5EED,
            },
        };
        Ok(ObjectiveSequence::new(pool, mode)?)
    }
}

/// Run section: algorithm mode, sizes, rates, trial count.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub mode: RunMode,
    pub k: usize,
    pub rounds: u64,
    pub trials: u64,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub reward_guess: Option<f64>,
    pub activation_cost: f64,
    pub thresholds: usize,
    pub wmr_eta: Option<f64>,
    pub n_estimate_factor: f64,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            mode: RunMode::DogBroadcast,
            k: 3,
            rounds: 1000,
            // Expected-regret estimates average over independent seeded
            // trials; ten is the documented default.
            trials: 10,
            seed: 42,
            alpha: None,
            gamma: None,
            eta: None,
            reward_guess: None,
            activation_cost: 0.05,
            thresholds: 16,
            wmr_eta: None,
            n_estimate_factor: 1.0,
        }
    }
}

/// A parsed, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub objective: ObjectiveSpec,
    pub run: RunSpec,
    pub csv_path: Option<PathBuf>,
}

impl Scenario {
    /// The run configuration of one trial; trial `i` runs with `seed + i`.
    pub fn run_config(&self, trial: u64) -> RunConfig {
        RunConfig {
            n: self.objective.sensors,
            k: self.run.k,
            rounds: self.run.rounds,
            mode: self.run.mode,
            seed: self.run.seed.wrapping_add(trial),
            alpha: self.run.alpha,
            gamma: self.run.gamma,
            eta: self.run.eta,
            reward_guess: self.run.reward_guess,
            activation_cost: self.run.activation_cost,
            thresholds: Some(
                (0..self.run.thresholds.max(1))
                    .map(|i| {
                        if self.run.thresholds <= 1 {
                            0.0
                        } else {
                            i as f64 / (self.run.thresholds - 1) as f64
                        }
                    })
                    .collect(),
            ),
            wmr_eta: self.run.wmr_eta,
            n_estimate_factor: self.run.n_estimate_factor,
            collect_trace: false,
        }
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse scenario text. `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Scenario> {
        let fail = |line: usize, message: String| HarnessError::Scenario {
            path: origin.to_string(),
            line,
            message,
        };

        // section -> key -> (line, value)
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                if !matches!(name.as_str(), "objective" | "run" | "output") {
                    return Err(fail(lineno, format!("unknown section [{name}]")));
                }
                if sections.contains_key(&name) {
                    return Err(fail(lineno, format!("duplicate section [{name}]")));
                }
                sections.insert(name.clone(), BTreeMap::new());
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(fail(lineno, format!("expected `key = value`, got `{line}`")));
            };
            let Some(section) = &current else {
                return Err(fail(lineno, "key outside any section".into()));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let map = sections.get_mut(section).expect("section exists");
            if map.insert(key.clone(), (lineno, value)).is_some() {
                return Err(fail(lineno, format!("duplicate key `{key}`")));
            }
        }

        let mut objective = ObjectiveSpec::default();
        if let Some(keys) = sections.remove("objective") {
            let mut family_line = 0usize;
            if let Some((line, value)) = keys.get("family") {
                family_line = *line;
                objective.family = match value.as_str() {
                    "coverage-grid" => ObjectiveFamily::CoverageGrid,
                    "detection" => ObjectiveFamily::Detection,
                    "gaussian-one-factor" => ObjectiveFamily::GaussianOneFactor,
                    "gaussian-equicorrelated" => ObjectiveFamily::GaussianEquicorrelated,
                    "gaussian-identity" => ObjectiveFamily::GaussianIdentity,
                    other => return Err(fail(*line, format!("unknown family `{other}`"))),
                };
            }
            for (key, (line, value)) in &keys {
                match key.as_str() {
                    "family" => {}
                    "sensors" => objective.sensors = parse_num(value, *line, origin)?,
                    "seed" => objective.seed = parse_num(value, *line, origin)?,
                    "pool" => objective.pool = parse_num(value, *line, origin)?,
                    "sequence" => {
                        objective.sequence = match value.as_str() {
                            "constant" => SequenceKind::Constant,
                            "cyclic" => SequenceKind::Cyclic,
                            "random" => SequenceKind::Random,
                            other => {
                                return Err(fail(*line, format!("unknown sequence `{other}`")))
                            }
                        }
                    }
                    "grid" => objective.grid = parse_num(value, *line, origin)?,
                    "radius" => objective.radius = parse_num(value, *line, origin)?,
                    "targets" => objective.targets = parse_num(value, *line, origin)?,
                    "rho" => objective.rho = parse_num(value, *line, origin)?,
                    other => {
                        return Err(fail(*line, format!("unknown key `{other}` in [objective]")))
                    }
                }
            }
            // Family-specific keys are rejected for other families.
            let allowed: &[&str] = match objective.family {
                ObjectiveFamily::CoverageGrid => &["grid", "radius"],
                ObjectiveFamily::Detection => &["targets"],
                ObjectiveFamily::GaussianEquicorrelated => &["rho"],
                ObjectiveFamily::GaussianOneFactor | ObjectiveFamily::GaussianIdentity => &[],
            };
            for param in ["grid", "radius", "targets", "rho"] {
                if keys.contains_key(param) && !allowed.contains(&param) {
                    let line = keys[param].0.max(family_line);
                    return Err(fail(
                        line,
                        format!("key `{param}` does not apply to this objective family"),
                    ));
                }
            }
        }

        let mut run = RunSpec::default();
        if let Some(keys) = sections.remove("run") {
            for (key, (line, value)) in &keys {
                match key.as_str() {
                    "mode" => {
                        run.mode = match value.as_str() {
                            "dog" => RunMode::DogBroadcast,
                            "lazydog" => RunMode::LazyDogRerun,
                            "lazydog-no-rerun" => RunMode::LazyDogNoRerun,
                            "oddog" => RunMode::OdDog,
                            other => return Err(fail(*line, format!("unknown mode `{other}`"))),
                        }
                    }
                    "k" => run.k = parse_num(value, *line, origin)?,
                    "rounds" => run.rounds = parse_num(value, *line, origin)?,
                    "trials" => run.trials = parse_num(value, *line, origin)?,
                    "seed" => run.seed = parse_num(value, *line, origin)?,
                    "alpha" => run.alpha = Some(parse_num(value, *line, origin)?),
                    "gamma" => run.gamma = Some(parse_num(value, *line, origin)?),
                    "eta" => run.eta = Some(parse_num(value, *line, origin)?),
                    "reward-guess" => run.reward_guess = Some(parse_num(value, *line, origin)?),
                    "activation-cost" => run.activation_cost = parse_num(value, *line, origin)?,
                    "thresholds" => run.thresholds = parse_num(value, *line, origin)?,
                    "wmr-eta" => run.wmr_eta = Some(parse_num(value, *line, origin)?),
                    "n-estimate-factor" => {
                        run.n_estimate_factor = parse_num(value, *line, origin)?
                    }
                    other => return Err(fail(*line, format!("unknown key `{other}` in [run]"))),
                }
            }
        }

        let mut csv_path = None;
        if let Some(keys) = sections.remove("output") {
            for (key, (line, value)) in &keys {
                match key.as_str() {
                    "csv" => csv_path = Some(PathBuf::from(value)),
                    other => return Err(fail(*line, format!("unknown key `{other}` in [output]"))),
                }
            }
        }

        if run.trials == 0 {
            return Err(HarnessError::Invalid("trials must be at least 1".into()));
        }
        Ok(Scenario {
            objective,
            run,
            csv_path,
        })
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, origin: &str) -> Result<T> {
    value.parse().map_err(|_| HarnessError::Scenario {
        path: origin.to_string(),
        line,
        message: format!(
            "cannot parse `{value}` as {}",
            std::any::type_name::<T>().rsplit("::").next().unwrap_or("number")
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# tiny scenario
[objective]
family = coverage-grid
sensors = 8
grid = 4
radius = 0.3
seed = 5

[run]
mode = dog
k = 2
rounds = 50
trials = 2
seed = 9

[output]
csv = /tmp/out.csv
";

    #[test]
    fn parses_valid_scenario() {
        let s = Scenario::parse(GOOD, "inline").unwrap();
        assert_eq!(s.objective.sensors, 8);
        assert_eq!(s.run.k, 2);
        assert_eq!(s.run.trials, 2);
        assert_eq!(s.csv_path.as_deref(), Some(Path::new("/tmp/out.csv")));
        let seq = s.objective.build_sequence().unwrap();
        assert_eq!(seq.universe().len(), 8);
        let config = s.run_config(1);
        assert_eq!(config.seed, 10);
        config.resolve().unwrap();
    }

    #[test]
    fn rejects_unknown_key_with_line_number() {
        let text = GOOD.replace("radius = 0.3", "radius = 0.3\nshiny = 1");
        let err = Scenario::parse(&text, "inline").unwrap_err();
        match err {
            HarnessError::Scenario { line, message, .. } => {
                assert_eq!(line, 7);
                assert!(message.contains("shiny"), "{message}");
            }
            other => panic!("expected scenario error, got {other}"),
        }
    }

    #[test]
    fn rejects_unknown_section_and_mode() {
        let err = Scenario::parse("[banana]\nx = 1\n", "inline").unwrap_err();
        assert!(matches!(err, HarnessError::Scenario { line: 1, .. }));

        let text = GOOD.replace("mode = dog", "mode = catwalk");
        let err = Scenario::parse(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("catwalk"));
    }

    #[test]
    fn rejects_family_foreign_parameters() {
        let text = GOOD
            .replace("family = coverage-grid", "family = detection")
            .replace("grid = 4\n", "");
        let err = Scenario::parse(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("radius"), "{err}");
    }

    #[test]
    fn rejects_bad_numbers_and_duplicates() {
        let text = GOOD.replace("rounds = 50", "rounds = fifty");
        let err = Scenario::parse(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("fifty"));

        let text = GOOD.replace("seed = 5", "seed = 5\nseed = 6");
        let err = Scenario::parse(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }
}
