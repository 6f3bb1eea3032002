use serde::{Deserialize, Serialize};

use super::{GrayImage, Point};
use crate::error::{Error, Result};

/// Geometric relation between an original image and a rescaled copy.
/// Pixel centers are aligned: original `(s + 0.5) * ratio - 0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMap {
    pub original_width: usize,
    pub original_height: usize,
    pub scaled_width: usize,
    pub scaled_height: usize,
}

impl FrameMap {
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            original_width: width,
            original_height: height,
            scaled_width: width,
            scaled_height: height,
        }
    }

    fn ratios(&self) -> (f64, f64) {
        (
            self.original_width as f64 / self.scaled_width as f64,
            self.original_height as f64 / self.scaled_height as f64,
        )
    }

    pub fn to_original(&self, p: Point) -> Point {
        let (rx, ry) = self.ratios();
        Point::new((p.x + 0.5) * rx - 0.5, (p.y + 0.5) * ry - 0.5)
    }

    pub fn to_scaled(&self, p: Point) -> Point {
        let (rx, ry) = self.ratios();
        Point::new((p.x + 0.5) / rx - 0.5, (p.y + 0.5) / ry - 0.5)
    }
}

/// Source sampling position for destination index `d` when resampling
/// `src_len` samples onto `dst_len`.
#[inline]
fn source_coord(d: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let s = ((d as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
        .clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resample to `target_height` rows, preserving the aspect ratio.
/// Bit depth is kept; an explicit pixel spacing is rescaled accordingly.
pub fn scale_to_height(img: &GrayImage, target_height: usize) -> Result<GrayImage> {
    if target_height == 0 {
        return Err(Error::InvalidConfig("target height must be at least 1".into()));
    }
    let (w, h) = (img.width(), img.height());
    if target_height == h {
        return Ok(img.clone());
    }
    let target_width = ((w as f64 * target_height as f64 / h as f64).round() as usize).max(1);
    let xs: Vec<_> = (0..target_width).map(|x| source_coord(x, w, target_width)).collect();
    let max = f64::from(img.max_level());
    let mut pixels = Vec::with_capacity(target_width * target_height);
    for y in 0..target_height {
        let (y0, y1, fy) = source_coord(y, h, target_height);
        for &(x0, x1, fx) in &xs {
            let top = f64::from(img.get(x0, y0)) * (1.0 - fx) + f64::from(img.get(x1, y0)) * fx;
            let bottom = f64::from(img.get(x0, y1)) * (1.0 - fx) + f64::from(img.get(x1, y1)) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            pixels.push(v.round().clamp(0.0, max) as u16);
        }
    }
    let mut out = GrayImage::new(target_width, target_height, img.bit_depth(), pixels)?;
    out.set_pixel_spacing_mm(
        img.explicit_pixel_spacing_mm()
            .map(|s| s * h as f64 / target_height as f64),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent resampler: interpolate along columns first, then rows,
    /// with explicit neighbour weights.
    fn oracle(img: &GrayImage, th: usize) -> Vec<u16> {
        let (w, h) = (img.width() as f64, img.height() as f64);
        let tw = (w * th as f64 / h).round() as usize;
        let mut out = Vec::new();
        for y in 0..th {
            for x in 0..tw {
                let sx = ((x as f64 + 0.5) * w / tw as f64 - 0.5).max(0.0).min(w - 1.0);
                let sy = ((y as f64 + 0.5) * h / th as f64 - 0.5).max(0.0).min(h - 1.0);
                let (x0, y0) = (sx.floor(), sy.floor());
                let (x1, y1) = ((x0 + 1.0).min(w - 1.0), (y0 + 1.0).min(h - 1.0));
                let at = |xx: f64, yy: f64| f64::from(img.get(xx as usize, yy as usize));
                let (ax, ay) = (sx - x0, sy - y0);
                let left = at(x0, y0) * (1.0 - ay) + at(x0, y1) * ay;
                let right = at(x1, y0) * (1.0 - ay) + at(x1, y1) * ay;
                out.push((left * (1.0 - ax) + right * ax).round() as u16);
            }
        }
        out
    }

    #[test]
    fn exact_halving_preserves_aspect() {
        let img = GrayImage::filled(400, 460, 8, 3).unwrap();
        let s = scale_to_height(&img, 230).unwrap();
        assert_eq!((s.width(), s.height()), (200, 230));
    }

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage::filled(13, 17, 12, 2345).unwrap();
        for th in [1, 5, 17, 40, 91] {
            let s = scale_to_height(&img, th).unwrap();
            assert!(s.pixels().iter().all(|&v| v == 2345));
        }
    }

    #[test]
    fn same_height_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = GrayImage::from_fn(9, 7, 16, |_, _| rng.gen()).unwrap();
        assert_eq!(scale_to_height(&img, 7).unwrap(), img);
    }

    #[test]
    fn doubling_matches_direct_resampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let img = GrayImage::from_fn(16, 16, 8, |_, _| rng.gen_range(0..256)).unwrap();
            let s = scale_to_height(&img, 32).unwrap();
            assert_eq!(s.width(), 32);
            assert_eq!(s.pixels(), oracle(&img, 32).as_slice());
            // Every output lies within the range of its 2x2 source neighbourhood.
            for y in 0..32 {
                for x in 0..32 {
                    let (x0, x1, _) = source_coord(x, 16, 32);
                    let (y0, y1, _) = source_coord(y, 16, 32);
                    let n = [img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1)];
                    let v = s.get(x, y);
                    assert!(v >= *n.iter().min().unwrap() && v <= *n.iter().max().unwrap());
                }
            }
        }
    }

    #[test]
    fn spacing_follows_scale() {
        let img = GrayImage::filled(10, 20, 8, 0).unwrap().with_pixel_spacing_mm(0.5);
        let s = scale_to_height(&img, 10).unwrap();
        assert!((s.pixel_spacing_mm() - 1.0).abs() < 1e-12);
        let d = GrayImage::filled(10, 2294, 8, 0).unwrap();
        assert!((d.pixel_spacing_mm() - 0.1).abs() < 1e-3);
    }

    #[test]
    fn frame_round_trip() {
        let f = FrameMap {
            original_width: 1000,
            original_height: 2294,
            scaled_width: 100,
            scaled_height: 230,
        };
        let p = Point::new(12.25, 99.0);
        let q = f.to_original(f.to_scaled(p));
        assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
    }
}
