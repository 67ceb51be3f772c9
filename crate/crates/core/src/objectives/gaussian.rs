//! Reduction in expected mean squared prediction error for a Gaussian model.

use super::{Objective, SensorUniverse};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use rand::{Rng, SeedableRng};

/// Jitter added to the conditioning block before the solve.
pub const DEFAULT_JITTER: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-9;

/// Fraction of total prior variance explained by observing the selected
/// sensors, under a joint Gaussian with covariance `sigma`:
///
/// `f(A) = (tr(Σ) - tr(Σ_UU - Σ_UA (Σ_AA + jitter·I)^{-1} Σ_AU)) / tr(Σ)`
///
/// where `U = V \ A`. Observed variables contribute zero residual variance,
/// so `f(∅) = 0` and `f(V) = 1`.
#[derive(Debug, Clone)]
pub struct GaussianEmseObjective {
    n: usize,
    // Row-major n x n.
    cov: Vec<f64>,
    jitter: f64,
    trace: f64,
}

impl GaussianEmseObjective {
    /// Validate symmetry and positive definiteness (via Cholesky) and build.
    pub fn new(cov: Vec<Vec<f64>>, jitter: f64) -> Result<Self> {
        let n = cov.len();
        if n == 0 {
            return Err(Error::Config("covariance must be nonempty".into()));
        }
        if jitter < 0.0 || !jitter.is_finite() {
            return Err(Error::Config(format!("jitter {jitter} must be nonnegative")));
        }
        let mut flat = vec![0.0; n * n];
        for (i, row) in cov.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config("covariance must be square".into()));
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::Config(format!("covariance entry ({i},{j}) not finite")));
                }
                flat[i * n + j] = x;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (flat[i * n + j] - flat[j * n + i]).abs() > SYMMETRY_TOL {
                    return Err(Error::NotPositiveDefinite(format!(
                        "asymmetric at ({i},{j}): {} vs {}",
                        flat[i * n + j],
                        flat[j * n + i]
                    )));
                }
            }
        }
        // All eigenvalues > 0 iff the (jitter-free) Cholesky succeeds.
        cholesky(&flat, n)?;
        let trace = (0..n).map(|i| flat[i * n + i]).sum();
        Ok(Self {
            n,
            cov: flat,
            jitter,
            trace,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut cov = vec![vec![0.0; n]; n];
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self::new(cov, DEFAULT_JITTER).expect("identity is SPD")
    }

    /// Unit-variance variables with common correlation `rho in [0, 1)`.
    pub fn equicorrelated(n: usize, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Config(format!("rho {rho} must lie in [0, 1)")));
        }
        let mut cov = vec![vec![rho; n]; n];
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self::new(cov, DEFAULT_JITTER)
    }

    /// Seeded one-factor model: every sensor observes a shared unit-variance
    /// latent signal through its own loading, plus independent noise, so
    /// `Σ_ij = b_i b_j + δ_ij σ_i²` with `b_i ∈ [0.3, 1]`, `σ_i² ∈ [0.1, 1]`.
    ///
    /// Variance reduction is not submodular for arbitrary covariances
    /// (suppressor effects), so the seeded generator sticks to this family,
    /// which keeps the diminishing-returns structure.
    pub fn one_factor(n: usize, seed: u64) -> Result<Self> {
        let mut rng = SimRng::seed_from_u64(seed);
        let loadings: Vec<f64> = (0..n).map(|_| 0.3 + 0.7 * rng.random::<f64>()).collect();
        let noises: Vec<f64> = (0..n).map(|_| 0.1 + 0.9 * rng.random::<f64>()).collect();
        let mut cov = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                cov[i][j] = loadings[i] * loadings[j];
            }
            cov[i][i] += noises[i];
        }
        Self::new(cov, DEFAULT_JITTER)
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.n + j]
    }

    /// EMSE reduction of observing `set` (sorted, deduplicated, in range).
    ///
    /// Residual variance at the unobserved indices is the trace of the Schur
    /// complement `Σ_UU - Σ_UA (Σ_AA + jitter·I)^{-1} Σ_AU`.
    pub fn emse_reduction(&self, set: &[usize]) -> Result<f64> {
        let n = self.n;
        for &id in set {
            if id >= n {
                return Err(Error::UnknownSensor { id, n });
            }
        }
        debug_assert!(set.windows(2).all(|w| w[0] < w[1]), "set must be strictly ascending");
        if set.is_empty() {
            return Ok(0.0);
        }
        if set.len() == n {
            return Ok(1.0);
        }
        let a = set;
        let m = a.len();
        // M = Σ_AA + jitter I
        let mut block = vec![0.0; m * m];
        for (bi, &i) in a.iter().enumerate() {
            for (bj, &j) in a.iter().enumerate() {
                block[bi * m + bj] = self.cov[i * n + j];
            }
            block[bi * m + bi] += self.jitter;
        }
        let chol = cholesky(&block, m)?;
        let in_a = {
            let mut mask = vec![false; n];
            for &i in a {
                mask[i] = true;
            }
            mask
        };
        let mut residual = 0.0;
        let mut rhs = vec![0.0; m];
        for (u, _) in in_a.iter().enumerate().filter(|(_, &observed)| !observed) {
            for (bi, &i) in a.iter().enumerate() {
                rhs[bi] = self.cov[i * n + u];
            }
            let y = chol_solve(&chol, m, &rhs);
            let explained: f64 = rhs.iter().zip(&y).map(|(&r, &yi)| r * yi).sum();
            residual += self.cov[u * n + u] - explained;
        }
        Ok((self.trace - residual) / self.trace)
    }
}

impl Objective for GaussianEmseObjective {
    fn universe(&self) -> SensorUniverse {
        SensorUniverse::new(self.n)
    }

    fn value(&self, set: &[usize]) -> f64 {
        // `value` receives canonical sets; the solve only fails on broken
        // per-instance state, which construction already rejected.
        self.emse_reduction(set).expect("validated covariance").clamp(0.0, 1.0)
    }
}

/// Dense lower-triangular Cholesky factor of a symmetric matrix, row-major.
fn cholesky(mat: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = mat[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite(format!(
                        "pivot {sum:.3e} at index {i} (matrix order {n})"
                    )));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve `L L^T x = b` for the factor returned by [`cholesky`].
fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}
