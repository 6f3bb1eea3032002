//! Breast/background separation: a global Otsu split refined by iterative
//! two-class quadratic discriminant reassignment on the scalar gray level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BreastMask, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Convergence when fewer than this fraction of all pixels change class.
    pub stop_fraction: f64,
    pub max_iterations: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            stop_fraction: 0.002,
            max_iterations: 100,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_fraction > 0.0 && self.stop_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "stop_fraction must lie in (0, 1), got {}",
                self.stop_fraction
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Otsu threshold on the 256-bin histogram of `img`. Pixels whose 8-bit
/// level is strictly greater than the returned level form the bright class.
/// Ties between equally good thresholds resolve to the lowest level.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    let mut hist = [0u64; 256];
    for v in img.levels8() {
        hist[v as usize] += 1;
    }
    otsu_from_histogram(&hist)
}

pub(crate) fn otsu_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let total: f64 = hist.iter().map(|&c| c as f64).sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(t, &c)| t as f64 * c as f64).sum();
    let mut w_low = 0.0;
    let mut sum_low = 0.0;
    let mut best = (f64::NEG_INFINITY, 0u8);
    for (t, &c) in hist.iter().enumerate().take(255) {
        w_low += c as f64;
        sum_low += t as f64 * c as f64;
        let w_high = total - w_low;
        if w_low == 0.0 || w_high == 0.0 {
            continue;
        }
        let diff = sum_low / w_low - (sum_all - sum_low) / w_high;
        let between = w_low * w_high * diff * diff;
        if between > best.0 {
            best = (between, t as u8);
        }
    }
    Ok(best.1)
}

/// Per-iteration record of a segmentation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationTrace {
    pub otsu_threshold: u8,
    /// Pixels that changed class in each completed iteration.
    pub reassigned: Vec<u64>,
    pub converged: bool,
    /// Set when an iteration would have emptied a class.
    pub collapsed: bool,
}

impl SegmentationTrace {
    pub fn iterations(&self) -> usize {
        self.reassigned.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct ClassFit {
    log_prior: f64,
    mean: f64,
    var: f64,
}

impl ClassFit {
    // Quantization noise of an integer level; keeps single-level classes finite.
    const MIN_VARIANCE: f64 = 1.0 / 12.0;

    fn log_posterior(&self, x: f64) -> f64 {
        let d = x - self.mean;
        self.log_prior - 0.5 * self.var.ln() - d * d / (2.0 * self.var)
    }
}

fn fit(hist: &[u64], member: &[bool], total: f64) -> Option<ClassFit> {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for (level, (&c, _)) in hist.iter().zip(member).enumerate().filter(|(_, (_, &m))| m) {
        let c = c as f64;
        let x = level as f64;
        n += c;
        s += c * x;
        s2 += c * x * x;
    }
    if n == 0.0 {
        return None;
    }
    let mean = s / n;
    let var = (s2 / n - mean * mean).max(ClassFit::MIN_VARIANCE);
    Some(ClassFit {
        log_prior: (n / total).ln(),
        mean,
        var,
    })
}

pub fn segment_breast(img: &GrayImage, cfg: &SegmentationConfig) -> Result<BreastMask> {
    segment_breast_traced(img, cfg).map(|(mask, _)| mask)
}

/// Segmentation that also reports the per-iteration reassignment counts.
pub fn segment_breast_traced(
    img: &GrayImage,
    cfg: &SegmentationConfig,
) -> Result<(BreastMask, SegmentationTrace)> {
    cfg.validate()?;
    let threshold = otsu_threshold(img)?;

    // Class membership is a function of the gray level alone, so every
    // iteration runs on the full-resolution level histogram.
    let levels = 1usize << img.bit_depth();
    let mut hist = vec![0u64; levels];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    let total = img.pixels().len() as f64;
    let shift = img.bit_depth() - 8;
    let mut breast: Vec<bool> = (0..levels).map(|v| (v >> shift) as u8 > threshold).collect();

    let stop = cfg.stop_fraction * total;
    let mut trace = SegmentationTrace {
        otsu_threshold: threshold,
        reassigned: Vec::new(),
        converged: false,
        collapsed: false,
    };
    for _ in 0..cfg.max_iterations {
        let background: Vec<bool> = breast.iter().map(|&b| !b).collect();
        let (Some(fg), Some(bg)) = (fit(&hist, &breast, total), fit(&hist, &background, total))
        else {
            trace.collapsed = true;
            break;
        };
        // The breast class is the brighter one.
        let (fg, bg) = if fg.mean >= bg.mean { (fg, bg) } else { (bg, fg) };
        let next: Vec<bool> = (0..levels)
            .map(|v| fg.log_posterior(v as f64) > bg.log_posterior(v as f64))
            .collect();
        let occupied = |m: &[bool], want: bool| {
            hist.iter().zip(m).any(|(&c, &b)| c > 0 && b == want)
        };
        if !occupied(&next, true) || !occupied(&next, false) {
            trace.collapsed = true;
            break;
        }
        let moved: u64 = hist
            .iter()
            .zip(breast.iter().zip(&next))
            .filter(|(_, (a, b))| a != b)
            .map(|(&c, _)| c)
            .sum();
        breast = next;
        trace.reassigned.push(moved);
        if (moved as f64) < stop {
            trace.converged = true;
            break;
        }
    }
    let mask = BreastMask::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&v| breast[v as usize]).collect(),
    )?;
    Ok((mask, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Exhaustive search minimizing the weighted within-class variance,
    /// computed directly from the pixel values.
    fn oracle_threshold(levels: &[u8]) -> u8 {
        let mut best = (f64::INFINITY, 0u8);
        for t in 0..255u8 {
            let (lo, hi): (Vec<f64>, Vec<f64>) = (
                levels.iter().filter(|&&v| v <= t).map(|&v| f64::from(v)).collect(),
                levels.iter().filter(|&&v| v > t).map(|&v| f64::from(v)).collect(),
            );
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let var = |xs: &[f64]| {
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
            };
            let within = var(&lo) + var(&hi);
            if best.0.is_infinite() || within < best.0 - 1e-9 * best.0.max(1.0) {
                best = (within, t);
            }
        }
        best.1
    }

    #[test]
    fn otsu_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let img = GrayImage::from_fn(32, 32, 8, |_, _| rng.gen_range(0..256)).unwrap();
            let t = otsu_threshold(&img).unwrap();
            let o = oracle_threshold(&img.levels8());
            // Equal partitions of the pixels, regardless of empty bins.
            let lv = img.levels8();
            assert!(lv.iter().all(|&v| (v > t) == (v > o)), "otsu {t} oracle {o}");
        }
    }

    #[test]
    fn otsu_two_levels() {
        let img = GrayImage::from_fn(8, 8, 8, |x, _| if x < 4 { 10 } else { 200 }).unwrap();
        let t = otsu_threshold(&img).unwrap();
        assert!((10..200).contains(&t));
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = GrayImage::filled(8, 8, 8, 77).unwrap();
        assert!(matches!(otsu_threshold(&img), Err(Error::DegenerateHistogram)));
        assert!(segment_breast(&img, &SegmentationConfig::default()).is_err());
    }

    #[test]
    fn separable_populations() {
        let img = GrayImage::from_fn(16, 16, 8, |x, y| if (x + y) % 3 == 0 { 200 } else { 10 })
            .unwrap();
        let (mask, trace) = segment_breast_traced(&img, &SegmentationConfig::default()).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(mask.contains(x, y), img.get(x, y) == 200);
            }
        }
        // Already at the fixed point after initialization.
        assert_eq!(trace.iterations(), 1);
        assert_eq!(trace.reassigned, vec![0]);
    }

    #[test]
    fn gaussian_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bg = Normal::new(30.0, 5.0).unwrap();
        let fg = Normal::new(180.0, 10.0).unwrap();
        let n = 128;
        let inside = |x: usize, y: usize| {
            let (dx, dy) = (x as f64 - 64.0, y as f64 - 64.0);
            dx * dx + dy * dy <= 40.0 * 40.0
        };
        let img = GrayImage::from_fn(n, n, 8, |x, y| {
            let v: f64 = if inside(x, y) { fg.sample(&mut rng) } else { bg.sample(&mut rng) };
            v.round().clamp(0.0, 255.0) as u16
        })
        .unwrap();
        let mask = segment_breast(&img, &SegmentationConfig::default()).unwrap();
        let disagree = (0..n * n)
            .filter(|&i| mask.as_slice()[i] != inside(i % n, i / n))
            .count();
        assert!(disagree as f64 <= 0.01 * (n * n) as f64, "{disagree}");
    }

    #[test]
    fn mask_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bg = Normal::new(40.0, 6.0).unwrap();
        let fg = Normal::new(150.0, 15.0).unwrap();
        let img = GrayImage::from_fn(64, 64, 8, |x, _| {
            let v: f64 = if x > 20 { fg.sample(&mut rng) } else { bg.sample(&mut rng) };
            v.round().clamp(5.0, 200.0) as u16
        })
        .unwrap();
        let base = segment_breast(&img, &SegmentationConfig::default()).unwrap();
        for c in [-5, 1, 17, 55] {
            let shifted = segment_breast(&img.offset(c).unwrap(), &SegmentationConfig::default())
                .unwrap();
            assert_eq!(base, shifted, "shift {c}");
        }
    }

    #[test]
    fn invalid_config() {
        let cfg = SegmentationConfig {
            stop_fraction: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SegmentationConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
