//! Microcalcification detection: a zero-sum nested box filter applied in the
//! frequency domain, thresholding, reduction of 8-connected blobs to single
//! foci, and merging of nearby foci into clusters.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::enhance::{enhance_image, EnhanceConfig, Enhanced};
use crate::error::{Error, Result};
use crate::imgcore::{BreastMask, FrameMap, GrayImage, Pixel, Point};
use crate::massdetect::{Marker, MarkerSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Side of the inner block; the kernel side is three times this.
    pub inner_w2: usize,
    /// Foci are pixels whose response strictly exceeds this value.
    pub threshold_th: f64,
    pub target_height: usize,
    /// Foci closer than this (strictly) share a cluster.
    pub merge_distance_mm: f64,
    /// A cluster is reported when it holds more foci than this.
    pub min_foci_per_cluster: usize,
    /// Enhancement settings; the target height is taken from `target_height`.
    #[serde(default)]
    pub enhance: EnhanceConfig,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            inner_w2: 2,
            threshold_th: 2.4,
            target_height: 2294,
            merge_distance_mm: 3.0,
            min_foci_per_cluster: 1,
            enhance: EnhanceConfig::default(),
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_w2 == 0 {
            return Err(Error::InvalidConfig("inner_w2 must be at least 1".into()));
        }
        if !self.threshold_th.is_finite() {
            return Err(Error::InvalidConfig("threshold_th must be finite".into()));
        }
        if !(self.merge_distance_mm >= 0.0 && self.merge_distance_mm.is_finite()) {
            return Err(Error::InvalidConfig("merge_distance_mm must be non-negative".into()));
        }
        self.enhance_config().validate()
    }

    pub fn enhance_config(&self) -> EnhanceConfig {
        EnhanceConfig {
            target_height: self.target_height,
            ..self.enhance
        }
    }
}

/// Square correlation kernel with its anchor (the cell aligned with the
/// pixel of interest).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub side: usize,
    pub anchor: usize,
    pub values: Vec<f64>,
}

impl Kernel {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.side + x]
    }

    /// Offsets of the kernel footprint relative to the pixel of interest.
    pub fn footprint(&self) -> (isize, isize) {
        let a = self.anchor as isize;
        (-a, self.side as isize - 1 - a)
    }
}

/// `3*w2` square kernel: the central `w2 x w2` block holds `1/w2^2`, the
/// surrounding ring `-1/(8 w2^2)`, so the kernel sums to zero. Anchored at
/// the top-left cell of the inner block.
pub fn build_nested_filter(w2: usize) -> Kernel {
    assert!(w2 >= 1, "inner block must be at least one pixel");
    let side = 3 * w2;
    let cells = (w2 * w2) as f64;
    let inner = 1.0 / cells;
    let ring = -1.0 / (8.0 * cells);
    let values = (0..side * side)
        .map(|i| {
            let (x, y) = (i % side, i / side);
            if (w2..2 * w2).contains(&x) && (w2..2 * w2).contains(&y) {
                inner
            } else {
                ring
            }
        })
        .collect();
    Kernel { side, anchor: w2, values }
}

/// Smallest integer at least `n` whose prime factors are all in {2, 3, 5, 7}.
fn fft_size(n: usize) -> usize {
    (n.max(1)..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5, 7] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("smooth numbers are unbounded")
}

struct Fft2 {
    w: usize,
    h: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(w: usize, h: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let (row, col) = if inverse {
            (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
        } else {
            (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
        };
        Self { w, h, row, col }
    }

    /// In-place 2-D transform of a row-major `h x w` buffer.
    fn process(&self, data: &mut [Complex<f64>]) {
        let (w, h) = (self.w, self.h);
        data.par_chunks_mut(w).for_each_init(
            || vec![Complex::default(); self.row.get_inplace_scratch_len()],
            |scratch, r| self.row.process_with_scratch(r, scratch),
        );
        let mut t = vec![Complex::default(); w * h];
        transpose(data, &mut t, w, h);
        t.par_chunks_mut(h).for_each_init(
            || vec![Complex::default(); self.col.get_inplace_scratch_len()],
            |scratch, c| self.col.process_with_scratch(c, scratch),
        );
        transpose(&t, data, h, w);
    }
}

fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], w: usize, h: usize) {
    const B: usize = 32;
    for by in (0..h).step_by(B) {
        for bx in (0..w).step_by(B) {
            for y in by..(by + B).min(h) {
                for x in bx..(bx + B).min(w) {
                    dst[x * h + y] = src[y * w + x];
                }
            }
        }
    }
}

/// Cross-correlation `R(x, y) = sum K(i, j) * I(x + i - a, y + j - a)` of a
/// real `w x h` raster with zero padding outside it, computed with FFTs.
pub fn correlate_fft(data: &[f64], w: usize, h: usize, kernel: &Kernel) -> Vec<f64> {
    assert_eq!(data.len(), w * h);
    let s = kernel.side;
    let (pw, ph) = (fft_size(w + s - 1), fft_size(h + s - 1));
    let mut img = vec![Complex::default(); pw * ph];
    for y in 0..h {
        for x in 0..w {
            img[y * pw + x] = Complex::new(data[y * w + x], 0.0);
        }
    }
    // Correlation as convolution with the kernel mirrored about its anchor.
    let mut ker = vec![Complex::default(); pw * ph];
    let a = kernel.anchor as isize;
    for j in 0..s {
        for i in 0..s {
            let dx = (a - i as isize).rem_euclid(pw as isize) as usize;
            let dy = (a - j as isize).rem_euclid(ph as isize) as usize;
            ker[dy * pw + dx] = Complex::new(kernel.get(i, j), 0.0);
        }
    }
    let fwd = Fft2::new(pw, ph, false);
    fwd.process(&mut img);
    fwd.process(&mut ker);
    img.par_iter_mut().zip(&ker).for_each(|(a, b)| *a *= b);
    Fft2::new(pw, ph, true).process(&mut img);
    let norm = 1.0 / (pw * ph) as f64;
    (0..w * h).map(|i| img[(i / w) * pw + i % w].re * norm).collect()
}

/// Filter response of `img` (8-bit levels) with responses outside `mask`
/// set to 0.
pub fn filter_response(img: &GrayImage, mask: &BreastMask, kernel: &Kernel) -> Result<Vec<f64>> {
    if !mask.matches(img) {
        return Err(Error::InvalidImage("mask and image sizes differ".into()));
    }
    if kernel.side > img.width().min(img.height()) {
        return Err(Error::InvalidImage("kernel larger than the image".into()));
    }
    let data: Vec<f64> = img.levels8().into_iter().map(f64::from).collect();
    let mut r = correlate_fft(&data, img.width(), img.height(), kernel);
    for (v, &m) in r.iter_mut().zip(mask.as_slice()) {
        if !m {
            *v = 0.0;
        }
    }
    Ok(r)
}

/// Centers of the 8-connected components of `on`: the arithmetic centroid
/// of each component rounded half-up, in raster order of first pixel.
pub fn component_centers(on: &[bool], w: usize, h: usize) -> Vec<Pixel> {
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !on[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut sx, mut sy, mut n) = (0usize, 0usize, 0usize);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            sx += x;
            sy += y;
            n += 1;
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if on[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        // floor(s / n + 1/2) in integer arithmetic.
        out.push(Pixel::new((2 * sx + n) / (2 * n), (2 * sy + n) / (2 * n)));
    }
    out
}

/// Connected components of the graph joining points closer than `radius`
/// (strict). Each group lists member indices ascending; groups are ordered
/// by their smallest member.
pub fn cluster_points(points: &[Point], radius: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    if radius > 0.0 && n > 1 {
        // Bucket grid with cell side `radius`: partners lie in adjacent cells.
        let cell = |p: &Point| ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64);
        let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
        for (i, p) in points.iter().enumerate() {
            grid.entry(cell(p)).or_default().push(i);
        }
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = cell(p);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy)) else { continue };
                    for &j in bucket {
                        if j > i && p.distance(&points[j]) < radius {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            if a != b {
                                parent[a.max(b)] = a.min(b);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FociCluster {
    pub members: Vec<usize>,
    /// Centroid of the members, rounded to the pixel grid of the detection
    /// frame and mapped to the original frame.
    pub center: Point,
    pub count: usize,
}

/// Detected foci and their clusters, in original-image coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FociSet {
    pub foci: Vec<Point>,
    pub clusters: Vec<FociCluster>,
}

impl FociSet {
    /// Clusters pixel foci of a detection frame with pixel spacing
    /// `spacing_mm` and maps everything through `frame`.
    pub fn from_foci(foci: &[Pixel], frame: &FrameMap, spacing_mm: f64, merge_distance_mm: f64) -> Self {
        let pts: Vec<Point> = foci.iter().map(|&p| Point::from(p)).collect();
        let groups = cluster_points(&pts, merge_distance_mm / spacing_mm);
        let clusters = groups
            .into_iter()
            .map(|members| {
                let k = members.len() as f64;
                let cx = members.iter().map(|&i| pts[i].x).sum::<f64>() / k;
                let cy = members.iter().map(|&i| pts[i].y).sum::<f64>() / k;
                let center = frame.to_original(Point::new((cx + 0.5).floor(), (cy + 0.5).floor()));
                FociCluster {
                    count: members.len(),
                    members,
                    center,
                }
            })
            .collect();
        Self {
            foci: pts.iter().map(|&p| frame.to_original(p)).collect(),
            clusters,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.foci.is_empty()
    }
}

/// Intermediate results of [`detect_foci`], kept for inspection.
#[derive(Debug, Clone)]
pub struct McDetection {
    pub enhanced: Enhanced,
    /// Mask restricted to pixels whose whole kernel footprint is breast.
    pub response_mask: BreastMask,
    pub response: Vec<f64>,
    pub foci_scaled: Vec<Pixel>,
    pub foci: FociSet,
}

/// Foci of an already enhanced image.
pub fn detect_foci_enhanced(enhanced: Enhanced, cfg: &McConfig) -> Result<McDetection> {
    cfg.validate()?;
    let kernel = build_nested_filter(cfg.inner_w2);
    let (lo, hi) = kernel.footprint();
    let response_mask = enhanced.mask.erode_footprint(lo, hi);
    let response = filter_response(&enhanced.image, &response_mask, &kernel)?;
    let on: Vec<bool> = response.iter().map(|&r| r > cfg.threshold_th).collect();
    let (w, h) = (enhanced.image.width(), enhanced.image.height());
    let foci_scaled = component_centers(&on, w, h);
    let foci = FociSet::from_foci(
        &foci_scaled,
        &enhanced.frame,
        enhanced.image.pixel_spacing_mm(),
        cfg.merge_distance_mm,
    );
    Ok(McDetection {
        enhanced,
        response_mask,
        response,
        foci_scaled,
        foci,
    })
}

/// Enhance at the configured height, filter, threshold, reduce blobs to
/// foci and merge nearby foci into clusters.
pub fn detect_foci(img: &GrayImage, cfg: &McConfig) -> Result<FociSet> {
    cfg.validate()?;
    let enhanced = enhance_image(img, &cfg.enhance_config())?;
    Ok(detect_foci_enhanced(enhanced, cfg)?.foci)
}

/// One marker per cluster holding more than `min_foci` foci, scored by its
/// focus count relative to the largest cluster of the image.
pub fn cluster_markers(foci: &FociSet, min_foci: usize) -> MarkerSet {
    let max = foci.clusters.iter().map(|c| c.count).max().unwrap_or(0);
    MarkerSet::new(
        foci.clusters
            .iter()
            .filter(|c| c.count > min_foci)
            .map(|c| Marker {
                x: c.center.x,
                y: c.center.y,
                score: c.count as f64 / max as f64,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use petgraph::unionfind::UnionFind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn correlate_direct(data: &[f64], w: usize, h: usize, k: &Kernel) -> Vec<f64> {
        let a = k.anchor as isize;
        let mut out = vec![0.0; w * h];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut s = 0.0;
                for j in 0..k.side as isize {
                    for i in 0..k.side as isize {
                        let (xx, yy) = (x + i - a, y + j - a);
                        if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h {
                            s += k.get(i as usize, j as usize) * data[yy as usize * w + xx as usize];
                        }
                    }
                }
                out[y as usize * w + x as usize] = s;
            }
        }
        out
    }

    #[test]
    fn kernel_values() {
        let k = build_nested_filter(2);
        assert_eq!(k.side, 6);
        assert_eq!(k.get(2, 2), 0.25);
        assert_eq!(k.get(3, 3), 0.25);
        assert_eq!(k.get(0, 0), -0.03125);
        assert_eq!(k.get(5, 2), -0.03125);
        let k1 = build_nested_filter(1);
        assert_eq!(k1.get(1, 1), 1.0);
        assert_eq!(k1.values.iter().filter(|&&v| v == -0.125).count(), 8);
    }

    #[test]
    fn kernel_sums_to_zero() {
        for w2 in [1, 2, 4] {
            let k = build_nested_filter(w2);
            assert_eq!(k.values.iter().sum::<f64>(), 0.0, "w2 {w2}");
        }
        for w2 in 1..8 {
            let c = (w2 * w2) as f64;
            let (a, b) = (1.0 / c, -1.0 / (8.0 * c));
            assert!((a * c + 8.0 * b * c).abs() < 1e-15);
        }
    }

    #[test]
    fn fft_matches_direct_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for w2 in [1, 2, 3] {
            let k = build_nested_filter(w2);
            for _ in 0..4 {
                let data: Vec<f64> = (0..64 * 64).map(|_| rng.gen_range(0.0..255.0)).collect();
                let f = correlate_fft(&data, 64, 64, &k);
                let d = correlate_direct(&data, 64, 64, &k);
                for (a, b) in f.iter().zip(&d) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
        // Non-square, odd-sized raster.
        let data: Vec<f64> = (0..37 * 23).map(|_| rng.gen_range(0.0..255.0)).collect();
        let k = build_nested_filter(2);
        let (f, d) = (correlate_fft(&data, 37, 23, &k), correlate_direct(&data, 37, 23, &k));
        assert!(f.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn delta_reproduces_kernel() {
        let (w, h) = (20, 20);
        let v = 200.0;
        let mut data = vec![0.0; w * h];
        data[10 * w + 10] = v;
        let k = build_nested_filter(2);
        let r = correlate_fft(&data, w, h, &k);
        // R(x, y) = K(10 - x + a, 10 - y + a) * v.
        for j in 0..6 {
            for i in 0..6 {
                let (x, y) = (10 + 2 - i, 10 + 2 - j);
                assert!((r[y * w + x] - v * k.get(i, j)).abs() < 1e-9);
            }
        }
        assert!((r[10 * w + 10] - v / 4.0).abs() < 1e-9);
        assert!((r[10 * w + 12] + v / 32.0).abs() < 1e-9);
        assert!(r[0].abs() < 1e-9);
    }

    #[test]
    fn constant_image_has_zero_response() {
        let img = GrayImage::filled(32, 32, 8, 117).unwrap();
        let kernel = build_nested_filter(2);
        let (lo, hi) = kernel.footprint();
        let mask = BreastMask::full(32, 32).erode_footprint(lo, hi);
        let r = filter_response(&img, &mask, &kernel).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn response_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..40 * 30).map(|_| rng.gen_range(0.0..100.0)).collect();
        let b: Vec<f64> = (0..40 * 30).map(|_| rng.gen_range(0.0..100.0)).collect();
        let k = build_nested_filter(2);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 1.5 * x - 0.75 * y).collect();
        let (ra, rb, rm) = (correlate_fft(&a, 40, 30, &k), correlate_fft(&b, 40, 30, &k), correlate_fft(&mix, 40, 30, &k));
        for i in 0..ra.len() {
            assert!((rm[i] - (1.5 * ra[i] - 0.75 * rb[i])).abs() < 1e-6);
        }
    }

    #[test]
    fn out_of_mask_response_is_zero() {
        let img = GrayImage::from_fn(16, 16, 8, |x, y| ((x * y) % 256) as u16).unwrap();
        let mask = BreastMask::from_fn(16, 16, |x, _| x > 7);
        let r = filter_response(&img, &mask, &build_nested_filter(1)).unwrap();
        assert!((0..256).filter(|i| i % 16 <= 7).all(|i| r[i] == 0.0));
    }

    #[test]
    fn components_reduce_to_rounded_centroids() {
        let (w, h) = (10, 8);
        let mut on = vec![false; w * h];
        // Diagonal pair (8-connected): centroid (1.5, 1.5) -> (2, 2).
        on[w + 1] = true;
        on[2 * w + 2] = true;
        // Horizontal run x = 5..=8 on row 5: centroid (6.5, 5) -> (7, 5).
        for x in 5..=8 {
            on[5 * w + x] = true;
        }
        let c = component_centers(&on, w, h);
        assert_eq!(c, vec![Pixel::new(2, 2), Pixel::new(7, 5)]);
    }

    #[test]
    fn clustering_matches_union_find() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let pts: Vec<Point> = (0..120)
                .map(|_| Point::new(rng.gen_range(0..200) as f64, rng.gen_range(0..200) as f64))
                .collect();
            let radius = rng.gen_range(3.0..25.0);
            let mut uf = UnionFind::<usize>::new(pts.len());
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    if pts[i].distance(&pts[j]) < radius {
                        uf.union(i, j);
                    }
                }
            }
            let labels = uf.into_labeling();
            let got = cluster_points(&pts, radius);
            let mut seen = vec![false; pts.len()];
            for g in &got {
                for &i in g {
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert_eq!(labels[i], labels[g[0]]);
                }
            }
            assert!(seen.iter().all(|&s| s));
            let distinct: std::collections::BTreeSet<_> = labels.iter().collect();
            assert_eq!(distinct.len(), got.len());
        }
    }

    #[test]
    fn merge_boundary_at_three_mm() {
        let foci = [Pixel::new(100, 100), Pixel::new(110, 100)];
        let frame = FrameMap::identity(300, 300);
        let near = FociSet::from_foci(&foci, &frame, 0.29, 3.0);
        assert_eq!(near.clusters.len(), 1);
        assert_eq!(near.clusters[0].count, 2);
        assert_eq!(near.clusters[0].center, Point::new(105.0, 100.0));
        let far = FociSet::from_foci(&foci, &frame, 0.31, 3.0);
        assert_eq!(far.clusters.len(), 2);
    }

    #[test]
    fn chains_merge_transitively() {
        let pts: Vec<Point> = (0..5).map(|i| Point::new(i as f64 * 2.0, 0.0)).collect();
        assert_eq!(cluster_points(&pts, 2.5), vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(cluster_points(&pts, 2.0).len(), 5);
    }

    fn with_counts(counts: &[usize]) -> FociSet {
        let mut foci = Vec::new();
        let mut clusters = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            let members: Vec<usize> = (foci.len()..foci.len() + n).collect();
            foci.extend((0..n).map(|_| Point::new(c as f64 * 100.0, 0.0)));
            clusters.push(FociCluster {
                members,
                center: Point::new(c as f64 * 100.0, 0.0),
                count: n,
            });
        }
        FociSet { foci, clusters }
    }

    #[test]
    fn markers_need_more_than_min_foci() {
        let f = with_counts(&[1, 2, 5]);
        let m = cluster_markers(&f, 1);
        assert_eq!(m.len(), 2);
        assert_eq!(m.markers[0].score, 1.0);
        assert_eq!(m.markers[1].score, 0.4);
        assert_eq!(cluster_markers(&f, 0).len(), 3);
        let s: Vec<f64> = cluster_markers(&with_counts(&[2, 4]), 0).markers.iter().map(|m| m.score).collect();
        assert_eq!(s, vec![1.0, 0.5]);
        assert!(cluster_markers(&FociSet::default(), 0).is_empty());
    }

    #[test]
    fn fft_sizes_are_smooth() {
        assert_eq!(fft_size(1), 1);
        assert_eq!(fft_size(11), 12);
        assert_eq!(fft_size(2299), 2304);
        assert_eq!(fft_size(1005), 1008);
    }

    #[test]
    fn config_validation() {
        assert!(McConfig::default().validate().is_ok());
        assert!(McConfig { inner_w2: 0, ..McConfig::default() }.validate().is_err());
        assert!(McConfig { merge_distance_mm: -1.0, ..McConfig::default() }.validate().is_err());
        assert_eq!(McConfig::default().enhance_config().target_height, 2294);
    }

    fn phantom_cfg() -> McConfig {
        McConfig {
            threshold_th: 110.0,
            ..McConfig::default()
        }
    }

    #[test]
    fn separated_specks_give_one_cluster_each() {
        use crate::phantom::{generate_phantom, PhantomSpec, SpeckSpec};
        let mut spec = PhantomSpec::blank(1000, 2294, 31);
        let sigma = spec.background.noise_sigma;
        // 6 mm apart at 0.1 mm per pixel.
        spec.specks = (0..5)
            .map(|i| SpeckSpec {
                center: Pixel::new(300 + 60 * i, 1100 + 15 * i),
                contrast: 6.0 * sigma,
                size: 2,
            })
            .collect();
        let p = generate_phantom(&spec).unwrap();
        let foci = detect_foci(&p.image, &phantom_cfg()).unwrap();
        let mut owners = Vec::new();
        for l in &p.annotations.labels {
            let inside: Vec<usize> = (0..foci.foci.len()).filter(|&i| l.contains(foci.foci[i])).collect();
            assert_eq!(inside.len(), 1);
            let owner = foci.clusters.iter().position(|c| c.members.contains(&inside[0])).unwrap();
            owners.push(owner);
        }
        owners.sort_unstable();
        owners.dedup();
        assert_eq!(owners.len(), 5);
    }

    #[test]
    fn blank_phantom_has_no_foci() {
        use crate::phantom::{generate_phantom, PhantomSpec};
        let mut spec = PhantomSpec::blank(1000, 2294, 32);
        spec.background.noise_sigma = 0.0;
        let p = generate_phantom(&spec).unwrap();
        assert!(detect_foci(&p.image, &phantom_cfg()).unwrap().is_empty());
    }
}
