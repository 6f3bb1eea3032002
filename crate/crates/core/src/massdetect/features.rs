//! Raw gray-level patch features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BreastMask, GrayImage, Pixel};
use crate::phantom::{AnnotationSet, LesionKind};

/// Which breast pixels contribute a feature row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Breast pixels inside a mass annotation.
    Mass,
    /// Breast pixels outside every mass annotation.
    Normal,
    /// Every breast pixel.
    All,
}

/// Row-major `rows x dim` matrix of 8-bit patch values with the pixel each
/// row was taken from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchMatrix {
    dim: usize,
    data: Vec<u8>,
    pixels: Vec<Pixel>,
}

impl PatchMatrix {
    #[cfg(test)]
    pub(crate) fn from_parts(dim: usize, data: Vec<u8>, pixels: Vec<Pixel>) -> Self {
        debug_assert_eq!(data.len(), dim * pixels.len());
        Self { dim, data, pixels }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    /// At most `cap` rows drawn uniformly without replacement, kept in
    /// their original order.
    pub fn subsample(&self, cap: usize, seed: u64) -> PatchMatrix {
        if self.rows() <= cap {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = rand::seq::index::sample(&mut rng, self.rows(), cap).into_vec();
        keep.sort_unstable();
        PatchMatrix {
            dim: self.dim,
            data: keep.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            pixels: keep.iter().map(|&i| self.pixels[i]).collect(),
        }
    }
}

/// Writes the `w1 x w1` window centred on `p` into `out`, replicating the
/// image edge for out-of-bounds positions.
pub(crate) fn patch_into(levels: &[u8], width: usize, height: usize, p: Pixel, w1: usize, out: &mut [u8]) {
    let r = (w1 / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut k = 0;
    for dy in -r..=r {
        let row = clamp(p.y as isize + dy, height) * width;
        for dx in -r..=r {
            out[k] = levels[row + clamp(p.x as isize + dx, width)];
            k += 1;
        }
    }
}

/// Selection of breast pixels for `region`; `annotations` are in the frame
/// of `mask`.
pub fn region_pixels(mask: &BreastMask, annotations: &AnnotationSet, region: Region) -> Result<Vec<Pixel>> {
    let pixels: Vec<Pixel> = match region {
        Region::All => mask.pixels().collect(),
        Region::Mass | Region::Normal => {
            if region == Region::Mass && !annotations.has_kind(LesionKind::Mass) {
                return Err(Error::NoMassAnnotation);
            }
            let lesion = annotations.rasterize(mask.width(), mask.height(), Some(LesionKind::Mass));
            let want = region == Region::Mass;
            mask.pixels()
                .filter(|p| lesion[p.y * mask.width() + p.x] == want)
                .collect()
        }
    };
    if region == Region::Mass && pixels.is_empty() {
        return Err(Error::EmptyRegion("mass"));
    }
    Ok(pixels)
}

/// One row per selected breast pixel holding the row-major gray levels of
/// its `w1 x w1` neighborhood.
pub fn extract_patch_features(
    img: &GrayImage,
    mask: &BreastMask,
    annotations: &AnnotationSet,
    region: Region,
    w1: usize,
) -> Result<PatchMatrix> {
    if w1 < 1 || w1 % 2 == 0 {
        return Err(Error::InvalidConfig(format!("patch window must be odd, got {w1}")));
    }
    if !mask.matches(img) {
        return Err(Error::InvalidImage("mask and image sizes differ".into()));
    }
    let pixels = region_pixels(mask, annotations, region)?;
    let levels = img.levels8();
    let dim = w1 * w1;
    let mut data = vec![0u8; pixels.len() * dim];
    for (p, out) in pixels.iter().zip(data.chunks_exact_mut(dim)) {
        patch_into(&levels, img.width(), img.height(), *p, w1, out);
    }
    Ok(PatchMatrix { dim, data, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::Point;
    use crate::phantom::Lesion;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> AnnotationSet {
        let b = vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ];
        AnnotationSet::new(vec![Lesion::new(1, LesionKind::Mass, b, None).unwrap()])
    }

    #[test]
    fn constant_image_rows() {
        let img = GrayImage::filled(10, 10, 8, 100).unwrap();
        let m = extract_patch_features(&img, &BreastMask::full(10, 10), &AnnotationSet::default(), Region::All, 3)
            .unwrap();
        assert_eq!(m.rows(), 100);
        assert_eq!(m.row(37), &[100u8; 9]);
    }

    #[test]
    fn edge_rows_keep_length() {
        let img = GrayImage::from_fn(6, 6, 8, |x, y| (x + 10 * y) as u16).unwrap();
        let mask = BreastMask::from_fn(6, 6, |x, y| x == 0 && y == 0);
        let m = extract_patch_features(&img, &mask, &AnnotationSet::default(), Region::All, 5).unwrap();
        assert_eq!(m.rows(), 1);
        assert_eq!(m.row(0).len(), 25);
        assert_eq!(m.row(0)[..5], [0, 0, 0, 1, 2]);
        assert_eq!(m.row(0)[20..], [20, 20, 20, 21, 22]);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let img = GrayImage::from_fn(8, 8, 8, |x, y| ((x * 37 + y * 91) % 256) as u16).unwrap();
        let mask = BreastMask::from_fn(8, 8, |x, y| (x + y) % 3 != 0);
        let w1 = 5;
        let m = extract_patch_features(&img, &mask, &AnnotationSet::default(), Region::All, w1).unwrap();
        let mut row = 0;
        for y in 0..8i64 {
            for x in 0..8i64 {
                if !mask.contains(x as usize, y as usize) {
                    continue;
                }
                let mut expect = Vec::new();
                for dy in -2..=2i64 {
                    for dx in -2..=2i64 {
                        let xx = (x + dx).clamp(0, 7) as usize;
                        let yy = (y + dy).clamp(0, 7) as usize;
                        expect.push(img.get(xx, yy) as u8);
                    }
                }
                assert_eq!(m.row(row), &expect[..]);
                assert_eq!(m.pixels()[row], Pixel::new(x as usize, y as usize));
                row += 1;
            }
        }
        assert_eq!(row, m.rows());
    }

    #[test]
    fn mass_and_normal_partition_breast() {
        let img = GrayImage::filled(12, 12, 8, 5).unwrap();
        let mask = BreastMask::full(12, 12);
        let ann = square(2.0, 2.0, 5.0, 5.0);
        let mass = extract_patch_features(&img, &mask, &ann, Region::Mass, 3).unwrap();
        let normal = extract_patch_features(&img, &mask, &ann, Region::Normal, 3).unwrap();
        assert_eq!(mass.rows(), 16);
        assert_eq!(mass.rows() + normal.rows(), 144);
    }

    #[test]
    fn subsample_keeps_order_and_cap() {
        let img = GrayImage::from_fn(10, 10, 8, |x, y| (x + 10 * y) as u16).unwrap();
        let m = extract_patch_features(&img, &BreastMask::full(10, 10), &AnnotationSet::default(), Region::All, 1)
            .unwrap();
        let s = m.subsample(30, 4);
        assert_eq!(s.rows(), 30);
        assert!(s.pixels().windows(2).all(|p| (p[0].y, p[0].x) < (p[1].y, p[1].x)));
        for (i, p) in s.pixels().iter().enumerate() {
            assert_eq!(s.row(i), &[(p.x + 10 * p.y) as u8]);
        }
        assert_eq!(s, m.subsample(30, 4));
        assert_eq!(m.subsample(500, 4), m);
    }

    #[test]
    fn mass_region_requires_annotation() {
        let img = GrayImage::filled(6, 6, 8, 5).unwrap();
        let r = extract_patch_features(&img, &BreastMask::full(6, 6), &AnnotationSet::default(), Region::Mass, 3);
        assert!(matches!(r, Err(Error::NoMassAnnotation)));
    }
}
