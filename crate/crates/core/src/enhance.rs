//! Local histogram specification (LHS).
//!
//! Every breast pixel is replaced by the target-distribution quantile of its
//! rank within the surrounding `W x W` window:
//! `t_new = min { t' : CDF_target(t') >= CDF_window(t) }`.
//! With a uniform target this is plain local histogram equalization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{scale_to_height, window_histogram, BreastMask, FrameMap, GrayImage, Histogram256, Pixel};
use crate::segment::{segment_breast, SegmentationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetFamily {
    Exponential,
    Uniform,
}

impl std::str::FromStr for TargetFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exponential" => Ok(Self::Exponential),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidConfig(format!("unknown target family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhanceConfig {
    /// Side of the local histogram window; odd.
    pub window: usize,
    /// Rate of the discrete exponential target over 255 gray levels.
    pub lambda: f64,
    pub target_height: usize,
    pub target_family: TargetFamily,
    #[serde(default)]
    pub segmentation: SegmentationConfig,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            window: 81,
            lambda: 10.0,
            target_height: 230,
            target_family: TargetFamily::Exponential,
            segmentation: SegmentationConfig::default(),
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "enhancement window must be odd and at least 3, got {}",
                self.window
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.target_height < 32 {
            return Err(Error::InvalidConfig(format!(
                "target height must be at least 32, got {}",
                self.target_height
            )));
        }
        self.segmentation.validate()
    }
}

/// Target gray-level distribution: `p(t) ∝ exp(-lambda * t / 255)` or uniform.
pub fn target_pdf(cfg: &EnhanceConfig) -> Histogram256 {
    let mut bins = [0.0; 256];
    match cfg.target_family {
        TargetFamily::Uniform => bins.fill(1.0 / 256.0),
        TargetFamily::Exponential => {
            for (t, b) in bins.iter_mut().enumerate() {
                *b = (-cfg.lambda * t as f64 / 255.0).exp();
            }
            let sum: f64 = bins.iter().sum();
            for b in &mut bins {
                *b /= sum;
            }
        }
    }
    Histogram256::from_probabilities(bins)
}

/// Generalized inverse of a CDF: smallest level whose CDF reaches `p`.
#[inline]
pub fn inverse_cdf(cdf: &[f64; 256], p: f64) -> u8 {
    cdf.partition_point(|&c| c < p).min(255) as u8
}

/// Reference per-pixel specification: recomputes the window histogram of
/// `poi` from scratch.
pub fn specify_pixel(
    img: &GrayImage,
    mask: &BreastMask,
    poi: Pixel,
    target_cdf: &[f64; 256],
    cfg: &EnhanceConfig,
) -> u8 {
    let hist = window_histogram(img, mask, poi, cfg.window);
    let level = img.level8(poi.x, poi.y) as usize;
    let n = hist.total();
    let at_or_below: f64 = hist.bins()[..=level].iter().sum();
    inverse_cdf(target_cdf, at_or_below / n)
}

/// Applies LHS to every masked pixel of an already scaled and segmented
/// image; unmasked pixels become 0. Bit-identical to calling
/// [`specify_pixel`] for each breast pixel.
pub fn specify_image(img: &GrayImage, mask: &BreastMask, cfg: &EnhanceConfig) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    let cdf = target_pdf(cfg).cdf();
    let levels = img.levels8();
    let r = cfg.window / 2;
    let rows: Vec<Vec<u16>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut out = vec![0u16; w];
            let row_mask = &mask.as_slice()[y * w..(y + 1) * w];
            if !row_mask.iter().any(|&b| b) {
                return out;
            }
            let y0 = y.saturating_sub(r);
            let y1 = (y + r).min(h - 1);
            let column = |hist: &mut [u32; 256], n: &mut u32, x: usize, add: bool| {
                for yy in y0..=y1 {
                    let i = yy * w + x;
                    if mask.as_slice()[i] {
                        let b = &mut hist[levels[i] as usize];
                        if add {
                            *b += 1;
                            *n += 1;
                        } else {
                            *b -= 1;
                            *n -= 1;
                        }
                    }
                }
            };
            let mut hist = [0u32; 256];
            let mut n = 0u32;
            for x in 0..=r.min(w - 1) {
                column(&mut hist, &mut n, x, true);
            }
            for x in 0..w {
                if x > 0 {
                    if x + r < w {
                        column(&mut hist, &mut n, x + r, true);
                    }
                    if x > r {
                        column(&mut hist, &mut n, x - r - 1, false);
                    }
                }
                if row_mask[x] {
                    let level = levels[y * w + x] as usize;
                    let at_or_below: u32 = hist[..=level].iter().sum();
                    out[x] = u16::from(inverse_cdf(&cdf, f64::from(at_or_below) / f64::from(n)));
                }
            }
            out
        })
        .collect();
    GrayImage::new(w, h, 8, rows.concat())
}

/// Output of [`enhance_image`].
#[derive(Debug, Clone)]
pub struct Enhanced {
    /// 8-bit LHS image at the standard height; background is 0.
    pub image: GrayImage,
    pub mask: BreastMask,
    /// Relation between the input image and `image`.
    pub frame: FrameMap,
}

/// Scale to the standard height, segment, then specify every breast pixel.
pub fn enhance_image(img: &GrayImage, cfg: &EnhanceConfig) -> Result<Enhanced> {
    cfg.validate()?;
    let scaled = scale_to_height(img, cfg.target_height)?;
    let mask = segment_breast(&scaled, &cfg.segmentation)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut image = specify_image(&scaled, &mask, cfg)?;
    image.set_pixel_spacing_mm(Some(scaled.pixel_spacing_mm()));
    Ok(Enhanced {
        frame: FrameMap {
            original_width: img.width(),
            original_height: img.height(),
            scaled_width: scaled.width(),
            scaled_height: scaled.height(),
        },
        image,
        mask,
    })
}

/// Kolmogorov-Smirnov distance between two 256-bin distributions.
pub fn ks_distance(a: &Histogram256, b: &Histogram256) -> f64 {
    let (ca, cb) = (a.cdf(), b.cdf());
    ca.iter()
        .zip(cb.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
