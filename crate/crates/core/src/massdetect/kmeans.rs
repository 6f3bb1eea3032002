//! Lloyd k-means with k-means++ seeding, accelerated by Elkan's
//! triangle-inequality bounds (same fixed points as plain Lloyd iterations).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::PatchMatrix;

/// Squared Euclidean distance between an 8-bit row and an `f32` centroid.
#[inline]
fn dist2(x: &[u8], c: &[f32]) -> f64 {
    let mut acc = [0f32; 8];
    let mut xs = x.chunks_exact(8);
    let mut cs = c.chunks_exact(8);
    for (xa, ca) in (&mut xs).zip(&mut cs) {
        for k in 0..8 {
            let d = f32::from(xa[k]) - ca[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0f32;
    for (&a, &b) in xs.remainder().iter().zip(cs.remainder()) {
        let d = f32::from(a) - b;
        tail += d * d;
    }
    acc.iter().map(|&v| f64::from(v)).sum::<f64>() + f64::from(tail)
}

fn center_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Result of [`kmeans`]: `k x dim` centroids, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub k: usize,
    pub dim: usize,
    pub centroids: Vec<f64>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

impl KMeans {
    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }
}

/// k-means++ seeding: first centre uniform, later ones proportional to the
/// squared distance to the nearest chosen centre.
fn seed_centers(data: &PatchMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.rows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let to_f32 = |i: usize| data.row(i).iter().map(|&v| f32::from(v)).collect::<Vec<_>>();
    let mut nearest: Vec<f64> = {
        let c = to_f32(chosen[0]);
        (0..n).map(|i| dist2(data.row(i), &c)).collect()
    };
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        chosen.push(next);
        let c = to_f32(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist2(data.row(i), &c));
        }
    }
    chosen
}

/// Clusters the rows of `data` into `min(k, rows)` centroids.
///
/// Deterministic for a given seed. Ties between equidistant centroids go to
/// the lower index; an emptied cluster is re-seeded with the point farthest
/// from its current centroid.
pub fn kmeans(data: &PatchMatrix, k: usize, seed: u64, max_iterations: usize) -> KMeans {
    let n = data.rows();
    let dim = data.dim();
    let k = k.min(n);
    assert!(k > 0, "k-means needs at least one row");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<f64> = seed_centers(data, k, &mut rng)
        .into_iter()
        .flat_map(|i| data.row(i).iter().map(|&v| f64::from(v)))
        .collect();
    let mut c32: Vec<f32> = centroids.iter().map(|&v| v as f32).collect();
    let dist = |x: &[u8], c32: &[f32], j: usize| dist2(x, &c32[j * dim..(j + 1) * dim]).sqrt();

    // Per-point upper bound on the distance to its centroid and per-point,
    // per-centroid lower bounds.
    let mut assignment = vec![0usize; n];
    let mut upper = vec![f64::INFINITY; n];
    let mut lower = vec![0f64; n * k];
    for i in 0..n {
        let x = data.row(i);
        let l = &mut lower[i * k..(i + 1) * k];
        for (j, lj) in l.iter_mut().enumerate() {
            *lj = dist(x, &c32, j);
            if *lj < upper[i] {
                upper[i] = *lj;
                assignment[i] = j;
            }
        }
    }

    let mut sums = vec![0u64; k * dim];
    let mut counts = vec![0usize; k];
    let mut cc = vec![0f64; k * k];
    let mut half_sep = vec![0f64; k];
    let mut iterations = 0;
    loop {
        iterations += 1;
        // Centroid update from exact integer sums.
        sums.iter_mut().for_each(|s| *s = 0);
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            let a = assignment[i];
            counts[a] += 1;
            for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(data.row(i)) {
                *s += u64::from(v);
            }
        }
        let reseeded = counts.contains(&0);
        // Exact distance of every point to its current centroid, consumed
        // by re-seeding (each re-seed takes the farthest remaining point).
        let mut spread: Vec<f64> = if reseeded {
            (0..n).map(|i| dist(data.row(i), &c32, assignment[i])).collect()
        } else {
            Vec::new()
        };
        let mut moved = vec![0f64; k];
        for j in 0..k {
            let new: Vec<f64> = if counts[j] > 0 {
                sums[j * dim..(j + 1) * dim]
                    .iter()
                    .map(|&s| s as f64 / counts[j] as f64)
                    .collect()
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| spread[a].total_cmp(&spread[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                spread[far] = f64::NEG_INFINITY;
                data.row(far).iter().map(|&v| f64::from(v)).collect()
            };
            moved[j] = center_dist(&centroids[j * dim..(j + 1) * dim], &new);
            centroids[j * dim..(j + 1) * dim].copy_from_slice(&new);
            for (c, &v) in c32[j * dim..(j + 1) * dim].iter_mut().zip(&new) {
                *c = v as f32;
            }
        }
        if iterations >= max_iterations {
            break;
        }

        // Bound maintenance.
        for i in 0..n {
            upper[i] += moved[assignment[i]];
            for (l, m) in lower[i * k..(i + 1) * k].iter_mut().zip(&moved) {
                *l = (*l - m).max(0.0);
            }
        }
        for a in 0..k {
            for b in a + 1..k {
                let d = center_dist(&centroids[a * dim..(a + 1) * dim], &centroids[b * dim..(b + 1) * dim]);
                cc[a * k + b] = d;
                cc[b * k + a] = d;
            }
        }
        for j in 0..k {
            half_sep[j] = (0..k).filter(|&o| o != j).map(|o| cc[j * k + o]).fold(f64::INFINITY, f64::min) / 2.0;
        }

        let mut changed = 0usize;
        for i in 0..n {
            let mut a = assignment[i];
            if upper[i] <= half_sep[a] {
                continue;
            }
            let x = data.row(i);
            let l = &mut lower[i * k..(i + 1) * k];
            let mut tight = false;
            for j in 0..k {
                if j == a || upper[i] < l[j] || upper[i] < 0.5 * cc[a * k + j] {
                    continue;
                }
                if !tight {
                    upper[i] = dist(x, &c32, a);
                    l[a] = upper[i];
                    tight = true;
                    if upper[i] < l[j] || upper[i] < 0.5 * cc[a * k + j] {
                        continue;
                    }
                }
                let d = dist(x, &c32, j);
                l[j] = d;
                if d < upper[i] || (d == upper[i] && j < a) {
                    a = j;
                    upper[i] = d;
                }
            }
            if a != assignment[i] {
                assignment[i] = a;
                changed += 1;
            }
        }
        if changed == 0 && !reseeded {
            break;
        }
    }

    KMeans {
        k,
        dim,
        centroids,
        assignment,
        iterations,
    }
}



#[cfg(test)]
pub(crate) fn matrix(dim: usize, rows: Vec<Vec<u8>>) -> PatchMatrix {
    use crate::imgcore::Pixel;
    let pixels = (0..rows.len()).map(|i| Pixel::new(i, 0)).collect();
    PatchMatrix::from_parts(dim, rows.concat(), pixels)
}
