//! Principal components of stacked centroid rows.

use nalgebra::{DMatrix, SymmetricEigen};

/// Mean vector and the leading principal directions (unit length, sorted by
/// decreasing variance, each with its largest-magnitude entry positive).
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl Pca {
    /// `rows` is a row-major `n x dim` matrix.
    pub fn fit(rows: &[f64], dim: usize, components: usize) -> Pca {
        let n = rows.len() / dim;
        assert!(n > 0 && components >= 1 && components <= dim);
        let mut mean = vec![0.0; dim];
        for r in rows.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, dim, |i, j| rows[i * dim + j] - mean[j]);
        let cov = centered.tr_mul(&centered) / (n.max(2) - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let basis = order[..components]
            .iter()
            .map(|&c| {
                let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let lead = v
                    .iter()
                    .copied()
                    .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
                let s = if lead < 0.0 { -1.0 } else { 1.0 } / norm;
                v.iter_mut().for_each(|x| *x *= s);
                v
            })
            .collect();
        Pca { mean, basis }
    }

    pub fn components(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| b.iter().zip(x.iter().zip(&self.mean)).map(|(b, (x, m))| b * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, y: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (b, &c) in self.basis.iter().zip(y) {
            for (o, v) in out.iter_mut().zip(b) {
                *o += c * v;
            }
        }
        out
    }
}
