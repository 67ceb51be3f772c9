//! Synthetic monotone submodular objectives and their verification.
//!
//! An [`Objective`] is an immutable set function `f: 2^V -> [0, 1]` over a
//! [`SensorUniverse`]. All shipped families are monotone submodular by
//! construction and normalized so the full universe scores at most 1;
//! [`check_monotone_submodular`] verifies both properties exhaustively on
//! small universes.

mod coverage;
mod detection;
mod gaussian;
mod sequence;

pub use coverage::CoverageObjective;
pub use detection::DetectionObjective;
pub use gaussian::{GaussianEmseObjective, DEFAULT_JITTER};
pub use sequence::{ObjectiveSequence, SequenceMode};

use crate::error::{Error, Result};

/// Tolerance for the exhaustive monotonicity/submodularity checks.
pub const SUBMODULARITY_TOL: f64 = 1e-9;

/// Largest universe [`check_monotone_submodular`] will enumerate.
pub const MAX_EXHAUSTIVE_N: usize = 12;

/// The ground set of sensors, identified as `0..n-1`.
///
/// Identifiers are unique and linearly ordered; ties throughout the crate are
/// broken toward the minimum id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorUniverse {
    n: usize,
}

impl SensorUniverse {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.n
    }

    pub fn ids(&self) -> std::ops::Range<usize> {
        0..self.n
    }
}

/// An evaluatable reward function over sensor subsets.
///
/// Implementations must be monotone, submodular, evaluate the empty set to 0
/// and map every subset into `[0, 1]`. `value` receives a strictly ascending,
/// duplicate-free id list; use [`evaluate`] for unvalidated input.
pub trait Objective: Send + Sync {
    fn universe(&self) -> SensorUniverse;

    /// Value on a sorted, deduplicated, in-universe set.
    fn value(&self, set: &[usize]) -> f64;
}

/// An arbitrary set function wrapped as an objective.
///
/// Mostly useful for exercising [`check_monotone_submodular`] against
/// functions that are known not to be submodular or monotone.
pub struct FnObjective<F> {
    universe: SensorUniverse,
    f: F,
}

impl<F: Fn(&[usize]) -> f64 + Send + Sync> FnObjective<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self {
            universe: SensorUniverse::new(n),
            f,
        }
    }
}

impl<F: Fn(&[usize]) -> f64 + Send + Sync> Objective for FnObjective<F> {
    fn universe(&self) -> SensorUniverse {
        self.universe
    }

    fn value(&self, set: &[usize]) -> f64 {
        (self.f)(set)
    }
}

/// Validate ids against the universe and return the set in canonical
/// (sorted, deduplicated) form.
fn canonicalize(objective: &dyn Objective, set: &[usize]) -> Result<Vec<usize>> {
    let n = objective.universe().len();
    for &id in set {
        if id >= n {
            return Err(Error::UnknownSensor { id, n });
        }
    }
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// Evaluate `objective` on `set` (any order, duplicates allowed).
pub fn evaluate(objective: &dyn Objective, set: &[usize]) -> Result<f64> {
    let s = canonicalize(objective, set)?;
    Ok(objective.value(&s))
}

/// Marginal gain of adding `v` to `set`: `f(set + v) - f(set)`.
///
/// Zero when `v` is already in the set; nonnegative for monotone objectives.
pub fn marginal_gain(objective: &dyn Objective, set: &[usize], v: usize) -> Result<f64> {
    let n = objective.universe().len();
    if v >= n {
        return Err(Error::UnknownSensor { id: v, n });
    }
    let base = canonicalize(objective, set)?;
    if base.binary_search(&v).is_ok() {
        return Ok(0.0);
    }
    let mut extended = base.clone();
    let pos = extended.binary_search(&v).unwrap_err();
    extended.insert(pos, v);
    Ok(objective.value(&extended) - objective.value(&base))
}

/// Witness of a monotonicity violation: `f(set + element) < f(set)`.
#[derive(Debug, Clone)]
pub struct MonotoneViolation {
    pub set: Vec<usize>,
    pub element: usize,
    pub value_before: f64,
    pub value_after: f64,
}

/// Witness of a submodularity violation: the marginal gain of `element` on
/// the superset exceeds its gain on the subset.
#[derive(Debug, Clone)]
pub struct SubmodularViolation {
    pub subset: Vec<usize>,
    pub superset: Vec<usize>,
    pub element: usize,
    pub subset_gain: f64,
    pub superset_gain: f64,
}

/// Result of the exhaustive structure check.
#[derive(Debug, Clone)]
pub struct SubmodularityReport {
    pub is_monotone: bool,
    pub is_submodular: bool,
    pub monotone_violation: Option<MonotoneViolation>,
    pub submodular_violation: Option<SubmodularViolation>,
}

impl SubmodularityReport {
    pub fn passed(&self) -> bool {
        self.is_monotone && self.is_submodular
    }
}

fn mask_to_set(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

/// Brute-force verification that `objective` is monotone and submodular.
///
/// Checks `f(A + s) - f(A) >= f(B + s) - f(B)` for every chain
/// `A ⊆ B ⊆ V`, `s ∉ B`, and `f(S + s) >= f(S)` for every `S`, `s ∉ S`, both
/// within [`SUBMODULARITY_TOL`]. Refuses universes larger than
/// `min(max_n, MAX_EXHAUSTIVE_N)` since the enumeration is exponential.
pub fn check_monotone_submodular(
    objective: &dyn Objective,
    max_n: usize,
) -> Result<SubmodularityReport> {
    let n = objective.universe().len();
    let limit = max_n.min(MAX_EXHAUSTIVE_N);
    if n > limit {
        return Err(Error::UniverseTooLarge { n, max: limit });
    }
    let size = 1usize << n;
    let mut values = vec![0.0f64; size];
    for (mask, slot) in values.iter_mut().enumerate() {
        *slot = objective.value(&mask_to_set(mask as u32));
    }

    let mut monotone_violation = None;
    'mono: for mask in 0..size {
        for s in 0..n {
            if mask & (1 << s) != 0 {
                continue;
            }
            let with = mask | (1 << s);
            if values[with] < values[mask] - SUBMODULARITY_TOL {
                monotone_violation = Some(MonotoneViolation {
                    set: mask_to_set(mask as u32),
                    element: s,
                    value_before: values[mask],
                    value_after: values[with],
                });
                break 'mono;
            }
        }
    }

    let mut submodular_violation = None;
    'sub: for b in 0..size {
        // Enumerate all subsets a of b, including b itself (trivially tight).
        let mut a = b;
        loop {
            for s in 0..n {
                if b & (1 << s) != 0 {
                    continue;
                }
                let gain_a = values[a | (1 << s)] - values[a];
                let gain_b = values[b | (1 << s)] - values[b];
                if gain_a < gain_b - SUBMODULARITY_TOL {
                    submodular_violation = Some(SubmodularViolation {
                        subset: mask_to_set(a as u32),
                        superset: mask_to_set(b as u32),
                        element: s,
                        subset_gain: gain_a,
                        superset_gain: gain_b,
                    });
                    break 'sub;
                }
            }
            if a == 0 {
                break;
            }
            a = (a - 1) & b;
        }
    }

    Ok(SubmodularityReport {
        is_monotone: monotone_violation.is_none(),
        is_submodular: submodular_violation.is_none(),
        monotone_violation,
        submodular_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Hand-checkable four-cell instance used across the crate's tests:
    /// sensor 0 covers cells {0,1}, sensor 1 covers {1,2}, sensor 2 covers {2,3}.
    pub(crate) fn tiny_coverage() -> CoverageObjective {
        CoverageObjective::unit_cells(4, vec![vec![0, 1], vec![1, 2], vec![2, 3]]).unwrap()
    }

    #[test]
    fn evaluate_tiny_coverage_pairs() {
        let f = tiny_coverage();
        // Independent oracle: enumerate the covered-cell union by hand.
        // {0, 2} covers cells {0,1} ∪ {2,3} = all four.
        assert_eq!(evaluate(&f, &[0, 2]).unwrap(), 1.0);
        assert_eq!(evaluate(&f, &[]).unwrap(), 0.0);
        assert_eq!(evaluate(&f, &[2, 0, 2]).unwrap(), 1.0); // order/duplicates ignored
    }

    #[test]
    fn evaluate_rejects_unknown_ids() {
        let f = tiny_coverage();
        match evaluate(&f, &[0, 3]) {
            Err(Error::UnknownSensor { id: 3, n: 3 }) => {}
            other => panic!("expected UnknownSensor, got {other:?}"),
        }
    }

    #[test]
    fn marginal_gain_tiny_coverage() {
        let f = tiny_coverage();
        // Adding sensor 1 to {0} only contributes cell 2: 1/4.
        let g = marginal_gain(&f, &[0], 1).unwrap();
        assert!((g - 0.25).abs() < 1e-12);
        // Duplicate element has zero gain.
        assert_eq!(marginal_gain(&f, &[0], 0).unwrap(), 0.0);
    }

    #[test]
    fn check_accepts_coverage_and_rejects_supermodular() {
        let f = tiny_coverage();
        let report = check_monotone_submodular(&f, 12).unwrap();
        assert!(report.is_monotone && report.is_submodular);

        // |S|^2 is supermodular on n = 3.
        let sq = FnObjective::new(3, |s: &[usize]| (s.len() * s.len()) as f64 / 9.0);
        let report = check_monotone_submodular(&sq, 12).unwrap();
        assert!(report.is_monotone);
        assert!(!report.is_submodular);
        let w = report.submodular_violation.expect("witness");
        assert!(w.subset_gain < w.superset_gain);

        // Budget-saturating coverage min(|S|, 2)/2 is monotone submodular.
        let sat = FnObjective::new(4, |s: &[usize]| s.len().min(2) as f64 / 2.0);
        let report = check_monotone_submodular(&sat, 12).unwrap();
        assert!(report.is_monotone && report.is_submodular);
    }

    #[test]
    fn check_refuses_large_universes() {
        let big = FnObjective::new(13, |s: &[usize]| s.len() as f64 / 13.0);
        match check_monotone_submodular(&big, 12) {
            Err(Error::UniverseTooLarge { n: 13, max: 12 }) => {}
            other => panic!("expected UniverseTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn check_detects_nonmonotone() {
        let dip = FnObjective::new(3, |s: &[usize]| if s.len() == 2 { 0.1 } else { s.len() as f64 / 3.0 });
        let report = check_monotone_submodular(&dip, 12).unwrap();
        assert!(!report.is_monotone);
        assert!(report.monotone_violation.is_some());
    }
}
