//! Image representation shared by every stage: rasters, masks, histograms,
//! file I/O and geometric scaling.

mod histogram;
mod io;
mod scale;

pub use histogram::{window_histogram, Histogram256};
pub use io::{load_image, save_image, save_mask, write_atomic};
pub use scale::{scale_to_height, FrameMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Image heights whose field of view is taken as 230 mm when no explicit
/// pixel spacing is attached.
const DEFAULT_FIELD_OF_VIEW_MM: f64 = 230.0;

/// Integer pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Real-valued image coordinate; pixel centers sit on integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<Pixel> for Point {
    fn from(p: Pixel) -> Self {
        Point::new(p.x as f64, p.y as f64)
    }
}

/// Grayscale raster with a bit depth in {8, 10, 12, 16}.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    bit_depth: u8,
    pixels: Vec<u16>,
    pixel_spacing_mm: Option<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, bit_depth: u8, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if !matches!(bit_depth, 8 | 10 | 12 | 16) {
            return Err(Error::InvalidImage(format!(
                "bit depth {bit_depth} not in {{8, 10, 12, 16}}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        let max = max_level(bit_depth);
        if let Some(&v) = pixels.iter().find(|&&v| v > max) {
            return Err(Error::InvalidImage(format!(
                "pixel value {v} exceeds {bit_depth}-bit range"
            )));
        }
        Ok(Self {
            width,
            height,
            bit_depth,
            pixels,
            pixel_spacing_mm: None,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        bit_depth: u8,
        mut f: impl FnMut(usize, usize) -> u16,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, bit_depth, pixels)
    }

    pub fn filled(width: usize, height: usize, bit_depth: u8, value: u16) -> Result<Self> {
        Self::new(width, height, bit_depth, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn max_level(&self) -> u16 {
        max_level(self.bit_depth)
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u16> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }

    /// Millimeters per pixel. Without an explicit value the image is assumed
    /// to span a 230 mm field of view vertically, so 230-pixel-high images
    /// are 1.0 mm/pixel and 2294-pixel-high images about 0.1 mm/pixel.
    pub fn pixel_spacing_mm(&self) -> f64 {
        self.pixel_spacing_mm
            .unwrap_or(DEFAULT_FIELD_OF_VIEW_MM / self.height as f64)
    }

    pub fn explicit_pixel_spacing_mm(&self) -> Option<f64> {
        self.pixel_spacing_mm
    }

    pub fn with_pixel_spacing_mm(mut self, spacing: f64) -> Self {
        self.pixel_spacing_mm = Some(spacing);
        self
    }

    pub(crate) fn set_pixel_spacing_mm(&mut self, spacing: Option<f64>) {
        self.pixel_spacing_mm = spacing;
    }

    /// Gray level quantized to one of 256 bins: `floor(t * 256 / 2^depth)`.
    #[inline]
    pub fn level8(&self, x: usize, y: usize) -> u8 {
        to_level8(self.get(x, y), self.bit_depth)
    }

    /// All pixels quantized to 256 bins.
    pub fn levels8(&self) -> Vec<u8> {
        let shift = self.bit_depth - 8;
        self.pixels.iter().map(|&v| (v >> shift) as u8).collect()
    }

    /// Adds `delta` to every pixel; fails when a value would leave the range.
    pub fn offset(&self, delta: i32) -> Result<Self> {
        let max = i32::from(self.max_level());
        let pixels = self
            .pixels
            .iter()
            .map(|&v| {
                let s = i32::from(v) + delta;
                if (0..=max).contains(&s) {
                    Ok(s as u16)
                } else {
                    Err(Error::InvalidImage(format!("offset {delta} leaves range")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(self.width, self.height, self.bit_depth, pixels)?;
        out.pixel_spacing_mm = self.pixel_spacing_mm;
        Ok(out)
    }
}

#[inline]
pub fn max_level(bit_depth: u8) -> u16 {
    ((1u32 << bit_depth) - 1) as u16
}

#[inline]
pub fn to_level8(value: u16, bit_depth: u8) -> u8 {
    (value >> (bit_depth - 8)) as u8
}

/// Binary raster marking breast (true) versus background (false).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BreastMask {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BreastMask {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask has {} cells, expected {}",
                mask.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut mask = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                mask.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            mask,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    /// Like [`contains`](Self::contains) but false outside the raster.
    #[inline]
    pub fn contains_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.mask[y as usize * self.width + x as usize]
    }

    /// Number of breast pixels.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        let w = self.width;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| Pixel::new(i % w, i / w))
    }

    pub fn matches(&self, img: &GrayImage) -> bool {
        self.width == img.width() && self.height == img.height()
    }

    /// Keeps only pixels whose whole `[lo, hi]` offset footprint (in both
    /// axes) lies inside the mask.
    pub fn erode_footprint(&self, lo: isize, hi: isize) -> BreastMask {
        let (w, h) = (self.width, self.height);
        // Separable erosion: rows first, then columns.
        let mut rows = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                rows[y * w + x] =
                    (lo..=hi).all(|d| self.contains_signed(x as isize + d, y as isize));
            }
        }
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                out[y * w + x] = (lo..=hi).all(|d| {
                    let yy = y as isize + d;
                    yy >= 0 && (yy as usize) < h && rows[yy as usize * w + x]
                });
            }
        }
        BreastMask {
            width: w,
            height: h,
            mask: out,
        }
    }
}
