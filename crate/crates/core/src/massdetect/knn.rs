//! K-nearest-centroid log-ratio scoring.

use super::model::TrainedMassModel;

/// Mass and normal centroids in one row-major table: mass rows first.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidTable {
    dim: usize,
    rows: Vec<f64>,
    mass_rows: usize,
}

impl CentroidTable {
    pub fn new(mass: &[Vec<f64>], normal: &[Vec<f64>]) -> Self {
        let dim = mass.first().or(normal.first()).map_or(0, Vec::len);
        let rows = mass.iter().chain(normal).flat_map(|r| r.iter().copied()).collect();
        Self {
            dim,
            rows,
            mass_rows: mass.len(),
        }
    }

    pub fn from_model(model: &TrainedMassModel) -> Self {
        Self::new(&model.mass_centroids, &model.normal_centroids)
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.rows.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of mass rows among the `k` nearest rows to `q`, distances
    /// ties broken by lower row index. `k` is clamped to the row count.
    pub fn mass_neighbors(&self, q: &[f64], k: usize, scratch: &mut Vec<(f64, u32)>) -> (usize, usize) {
        let k = k.min(self.len());
        scratch.clear();
        scratch.extend(self.rows.chunks_exact(self.dim).enumerate().map(|(i, r)| {
            let d: f64 = r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, i as u32)
        }));
        if k == 0 {
            return (0, 0);
        }
        let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scratch.len() {
            scratch.select_nth_unstable_by(k - 1, cmp);
        }
        let n1 = scratch[..k].iter().filter(|(_, i)| (*i as usize) < self.mass_rows).count();
        (n1, k - n1)
    }

    /// `ln((n1 + 1) / (n2 + 1))` over the `k` nearest rows.
    pub fn score(&self, q: &[f64], k: usize, scratch: &mut Vec<(f64, u32)>) -> f64 {
        let (n1, n2) = self.mass_neighbors(q, k, scratch);
        ((n1 as f64 + 1.0) / (n2 as f64 + 1.0)).ln()
    }
}

/// Log-ratio of mass to normal neighbors among the `k` centroids of `model`
/// nearest to the projected feature vector.
pub fn knn_score(feature: &[f64], model: &TrainedMassModel, k: usize) -> f64 {
    CentroidTable::from_model(model).score(feature, k, &mut Vec::new())
}
