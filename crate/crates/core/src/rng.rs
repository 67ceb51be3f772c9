//! Deterministic random sources.
//!
//! Every sampling operation in this crate takes an explicit random source so
//! that a run is reproducible from its seed alone. ChaCha8 is used because it
//! is portable and its output is identical across platforms.

use rand::{Rng, SeedableRng};

pub type SimRng = rand_chacha::ChaCha8Rng;

/// Root random source for a run.
pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Independent stream derived from `(seed, stream)`.
///
/// Used where a quantity must be deterministic given the seed and an index
/// (e.g. the objective drawn at round `t`) without disturbing the main
/// protocol draws.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Index into `[0, 1)` partitioned by cumulative `weights`, half-open so a
/// draw landing exactly on a boundary goes to the higher-id side.
///
/// Returns `None` when all weights are zero. Weights must be nonnegative and
/// finite. The draw `r` must lie in `[0, 1)`.
pub fn pick_proportional(weights: &[f64], r: f64) -> Option<usize> {
    debug_assert!((0.0..1.0).contains(&r));
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let target = r * total;
    let mut cum = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        debug_assert!(w >= 0.0 && w.is_finite());
        if w > 0.0 {
            last_positive = Some(i);
        }
        cum += w;
        if target < cum {
            return Some(i);
        }
    }
    // Floating-point shortfall at the top of the partition: the draw belongs
    // to the last element with positive mass.
    last_positive
}

/// One uniform draw in `[0, 1)`.
pub fn unit_draw(rng: &mut impl Rng) -> f64 {
    rng.random::<f64>()
}
