//! Weighted-cell coverage: the sensing-region model.

use super::{Objective, SensorUniverse};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use rand::{Rng, SeedableRng};

/// Total weight of cells covered by the selected sensors, normalized by the
/// weight of all cells (so the full universe scores at most 1 and exactly 1
/// only when every cell is reachable).
#[derive(Debug, Clone)]
pub struct CoverageObjective {
    cell_weights: Vec<f64>,
    regions: Vec<Vec<usize>>,
    total_weight: f64,
}

impl CoverageObjective {
    /// Build from explicit cell weights and per-sensor covered-cell lists.
    pub fn new(cell_weights: Vec<f64>, regions: Vec<Vec<usize>>) -> Result<Self> {
        let cells = cell_weights.len();
        if cells == 0 {
            return Err(Error::Config("coverage needs at least one cell".into()));
        }
        for &w in &cell_weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Config(format!("cell weight {w} must be nonnegative")));
            }
        }
        let total_weight: f64 = cell_weights.iter().sum();
        if total_weight <= 0.0 {
            return Err(Error::Config("total cell weight must be positive".into()));
        }
        let mut regions = regions;
        for region in &mut regions {
            region.sort_unstable();
            region.dedup();
            if let Some(&bad) = region.iter().find(|&&c| c >= cells) {
                return Err(Error::Config(format!("region cell {bad} out of range 0..{cells}")));
            }
        }
        Ok(Self {
            cell_weights,
            regions,
            total_weight,
        })
    }

    /// Unit-weight cells.
    pub fn unit_cells(cells: usize, regions: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(vec![1.0; cells], regions)
    }

    /// Random instance: cells at the centers of a `grid_side x grid_side`
    /// lattice on the unit square, sensors at uniform positions covering a
    /// disk of the given radius, cell weights uniform in [0.5, 1.5].
    pub fn random_grid(n_sensors: usize, grid_side: usize, radius: f64, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        let cells = grid_side * grid_side;
        let mut centers = Vec::with_capacity(cells);
        for gy in 0..grid_side {
            for gx in 0..grid_side {
                centers.push((
                    (gx as f64 + 0.5) / grid_side as f64,
                    (gy as f64 + 0.5) / grid_side as f64,
                ));
            }
        }
        let cell_weights: Vec<f64> = (0..cells).map(|_| 0.5 + rng.random::<f64>()).collect();
        let mut regions = Vec::with_capacity(n_sensors);
        for _ in 0..n_sensors {
            let sx = rng.random::<f64>();
            let sy = rng.random::<f64>();
            let covered = centers
                .iter()
                .enumerate()
                .filter(|(_, &(cx, cy))| {
                    let dx = cx - sx;
                    let dy = cy - sy;
                    dx * dx + dy * dy <= radius * radius
                })
                .map(|(c, _)| c)
                .collect();
            regions.push(covered);
        }
        Self::new(cell_weights, regions).expect("generated instance is valid")
    }

    pub fn cells(&self) -> usize {
        self.cell_weights.len()
    }
}

impl Objective for CoverageObjective {
    fn universe(&self) -> SensorUniverse {
        SensorUniverse::new(self.regions.len())
    }

    fn value(&self, set: &[usize]) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        let mut covered = vec![false; self.cell_weights.len()];
        for &v in set {
            for &c in &self.regions[v] {
                covered[c] = true;
            }
        }
        let w: f64 = covered
            .iter()
            .zip(&self.cell_weights)
            .filter(|(&hit, _)| hit)
            .map(|(_, &w)| w)
            .sum();
        w / self.total_weight
    }
}
