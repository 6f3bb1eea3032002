//! Featureless mass detection: raw gray-level patches are summarized per
//! training image by k-means centroids, reduced with PCA, and test pixels
//! are scored by the mass/normal composition of their K nearest centroids.

mod features;
mod kmeans;
mod knn;
mod markers;
mod model;
mod pca;

pub use features::{extract_patch_features, region_pixels, PatchMatrix, Region};
pub use kmeans::{kmeans, KMeans};
pub use knn::{knn_score, CentroidTable};
pub use markers::{find_markers, Marker, MarkerSet};
pub use model::{ModelFile, TrainedMassModel, MODEL_FORMAT, MODEL_VERSION};
pub use pca::Pca;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enhance::{enhance_image, EnhanceConfig, Enhanced};
use crate::error::{Error, Result};
use crate::imgcore::{BreastMask, FrameMap, GrayImage};
use crate::phantom::AnnotationSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassConfig {
    /// Side of the square patch whose gray levels form a feature vector.
    pub patch_w1: usize,
    /// k-means centroids kept per region per training image.
    pub centroids_r: usize,
    /// Principal components retained.
    pub pca_c: usize,
    /// Neighbors consulted when scoring a pixel.
    pub knn_k: usize,
    /// Side of the mean filter applied to normalized scores.
    pub smooth_side: usize,
    /// Patch sizes of the multi-window ensemble.
    pub mcs_windows: Vec<usize>,
    pub kmeans_max_iterations: usize,
    /// Upper bound on the rows clustered per region and image; larger
    /// regions are subsampled uniformly. `None` clusters every row.
    #[serde(default)]
    pub kmeans_sample_cap: Option<usize>,
    #[serde(default)]
    pub enhance: EnhanceConfig,
}

impl Default for MassConfig {
    fn default() -> Self {
        Self {
            patch_w1: 21,
            centroids_r: 100,
            pca_c: 10,
            knn_k: 141,
            smooth_side: 10,
            mcs_windows: vec![9, 15, 21, 27, 33, 39],
            kmeans_max_iterations: 100,
            kmeans_sample_cap: None,
            enhance: EnhanceConfig::default(),
        }
    }
}

impl MassConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let odd = |w: usize| w >= 3 && w % 2 == 1;
        if !odd(self.patch_w1) {
            return bad(format!("patch_w1 must be odd and at least 3, got {}", self.patch_w1));
        }
        if self.centroids_r == 0 {
            return bad("centroids_r must be at least 1".into());
        }
        if self.pca_c == 0 || self.pca_c > self.patch_w1 * self.patch_w1 {
            return bad(format!("pca_c must lie in 1..={}, got {}", self.patch_w1 * self.patch_w1, self.pca_c));
        }
        if self.knn_k % 2 == 0 {
            return bad(format!("knn_k must be odd, got {}", self.knn_k));
        }
        if self.smooth_side == 0 {
            return bad("smooth_side must be at least 1".into());
        }
        if self.mcs_windows.is_empty() {
            return bad("mcs_windows must not be empty".into());
        }
        if let Some(&w) = self.mcs_windows.iter().find(|&&w| !odd(w) || self.pca_c > w * w) {
            return bad(format!("ensemble window {w} must be odd, at least 3 and hold pca_c pixels"));
        }
        if self.kmeans_max_iterations == 0 {
            return bad("kmeans_max_iterations must be at least 1".into());
        }
        if self.kmeans_sample_cap.is_some_and(|c| c < self.centroids_r) {
            return bad("kmeans_sample_cap must be at least centroids_r".into());
        }
        self.enhance.validate()
    }
}

/// Per-pixel mass likelihood in the enhanced (scaled) frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, in `[0, 1]`, exactly 0 outside the mask.
    pub scores: Vec<f64>,
    pub mask: BreastMask,
    pub frame: FrameMap,
}

impl ScoreImage {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.scores[y * self.width + x]
    }

    /// 8-bit rendering for inspection.
    pub fn to_gray(&self) -> GrayImage {
        let px = self.scores.iter().map(|&s| (s * 255.0).round() as u16).collect();
        GrayImage::new(self.width, self.height, 8, px).expect("score raster is well formed")
    }
}

/// Enhanced training image with annotations mapped into its frame.
#[derive(Debug, Clone)]
pub struct TrainingView {
    pub enhanced: Enhanced,
    pub annotations: AnnotationSet,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Enhances every training image and checks it carries a mass label.
pub fn prepare_training(
    training_set: &[(GrayImage, AnnotationSet)],
    enhance: &EnhanceConfig,
) -> Result<Vec<TrainingView>> {
    if training_set.is_empty() {
        return Err(Error::InvalidConfig("training needs at least one image".into()));
    }
    training_set
        .par_iter()
        .map(|(img, ann)| {
            if !ann.has_kind(crate::phantom::LesionKind::Mass) {
                return Err(Error::NoMassAnnotation);
            }
            let enhanced = enhance_image(img, enhance)?;
            let frame = enhanced.frame;
            Ok(TrainingView {
                annotations: ann.map_points(|p| frame.to_scaled(p)),
                enhanced,
            })
        })
        .collect()
}

/// Trains one model per patch size in `windows` from prepared views.
/// Every image uses the same k-means seeds, so results do not depend on
/// image order within the list beyond centroid stacking order.
pub fn train_prepared(views: &[TrainingView], cfg: &MassConfig, windows: &[usize], seed: u64) -> Result<Vec<TrainedMassModel>> {
    cfg.validate()?;
    windows
        .iter()
        .map(|&w1| {
            let per_image: Vec<(Vec<f64>, Vec<f64>)> = views
                .par_iter()
                .map(|v| {
                    let e = &v.enhanced;
                    let cluster = |region: Region, tag: u64| -> Result<Vec<f64>> {
                        let feats = extract_patch_features(&e.image, &e.mask, &v.annotations, region, w1)?;
                        if feats.is_empty() {
                            return Err(Error::EmptyRegion(if region == Region::Mass { "mass" } else { "normal" }));
                        }
                        let s = splitmix(seed ^ splitmix(w1 as u64 ^ (tag << 32)));
                        let feats = match cfg.kmeans_sample_cap {
                            Some(cap) => feats.subsample(cap, splitmix(s)),
                            None => feats,
                        };
                        Ok(kmeans(&feats, cfg.centroids_r, s, cfg.kmeans_max_iterations).centroids)
                    };
                    Ok((cluster(Region::Mass, 1)?, cluster(Region::Normal, 2)?))
                })
                .collect::<Result<_>>()?;
            let dim = w1 * w1;
            let mass: Vec<f64> = per_image.iter().flat_map(|(m, _)| m.iter().copied()).collect();
            let normal: Vec<f64> = per_image.iter().flat_map(|(_, n)| n.iter().copied()).collect();
            let stacked: Vec<f64> = normal.iter().chain(&mass).copied().collect();
            let pca = Pca::fit(&stacked, dim, cfg.pca_c);
            let project = |rows: &[f64]| rows.chunks_exact(dim).map(|r| pca.project(r)).collect::<Vec<_>>();
            Ok(TrainedMassModel {
                patch_w1: w1,
                mass_centroids: project(&mass),
                normal_centroids: project(&normal),
                pc_mean: pca.mean.clone(),
                pc_basis: pca.basis.clone(),
                training_image_count: views.len(),
                enhance_cfg: cfg.enhance,
            })
        })
        .collect()
}

/// Trains the single-window model of `cfg.patch_w1`.
pub fn train(training_set: &[(GrayImage, AnnotationSet)], cfg: &MassConfig, seed: u64) -> Result<TrainedMassModel> {
    cfg.validate()?;
    let views = prepare_training(training_set, &cfg.enhance)?;
    Ok(train_prepared(&views, cfg, &[cfg.patch_w1], seed)?.remove(0))
}

/// Trains one model per window of `cfg.mcs_windows`.
pub fn train_mcs(training_set: &[(GrayImage, AnnotationSet)], cfg: &MassConfig, seed: u64) -> Result<Vec<TrainedMassModel>> {
    cfg.validate()?;
    let views = prepare_training(training_set, &cfg.enhance)?;
    train_prepared(&views, cfg, &cfg.mcs_windows, seed)
}

/// Raw KNN scores of every breast pixel, min-max normalized to `[0, 1]`
/// over the breast (all 0 when every score is equal). Not smoothed.
pub fn normalized_scores(enhanced: &Enhanced, model: &TrainedMassModel, knn_k: usize) -> Vec<f64> {
    let img = &enhanced.image;
    let (w, h) = (img.width(), img.height());
    let levels = img.levels8();
    let table = CentroidTable::from_model(model);
    let w1 = model.patch_w1;
    let mask = enhanced.mask.as_slice();
    let mut scores: Vec<f64> = (0..h)
        .into_par_iter()
        .map_init(
            || (vec![0u8; w1 * w1], vec![0f64; model.components()], Vec::new()),
            |(patch, proj, scratch), y| {
                (0..w)
                    .map(|x| {
                        if !mask[y * w + x] {
                            return 0.0;
                        }
                        features::patch_into(&levels, w, h, crate::imgcore::Pixel::new(x, y), w1, patch);
                        model.project_patch(patch, proj);
                        table.score(proj, knn_k, scratch)
                    })
                    .collect::<Vec<f64>>()
            },
        )
        .flatten()
        .collect();
    let (lo, hi) = scores
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&s, _)| (lo.min(s), hi.max(s)));
    for (s, &m) in scores.iter_mut().zip(mask) {
        *s = if m && hi > lo { (*s - lo) / (hi - lo) } else { 0.0 };
    }
    scores
}

/// Mean over the `side x side` neighborhood intersected with the mask; the
/// pixel of interest sits at offset `side / 2` inside the window.
pub fn smooth_scores(scores: &[f64], mask: &BreastMask, side: usize) -> Vec<f64> {
    let (w, h) = (mask.width(), mask.height());
    let m = mask.as_slice();
    // Summed-area tables of masked scores and mask counts.
    let stride = w + 1;
    let mut sum = vec![0f64; stride * (h + 1)];
    let mut cnt = vec![0u32; stride * (h + 1)];
    for y in 0..h {
        let (mut rs, mut rc) = (0f64, 0u32);
        for x in 0..w {
            if m[y * w + x] {
                rs += scores[y * w + x];
                rc += 1;
            }
            sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
            cnt[(y + 1) * stride + x + 1] = cnt[y * stride + x + 1] + rc;
        }
    }
    let lo = (side / 2) as isize;
    let hi = (side - 1 - side / 2) as isize;
    let mut out = vec![0f64; w * h];
    for y in 0..h {
        let y0 = (y as isize - lo).max(0) as usize;
        let y1 = ((y as isize + hi) as usize).min(h - 1) + 1;
        for x in 0..w {
            if !m[y * w + x] {
                continue;
            }
            let x0 = (x as isize - lo).max(0) as usize;
            let x1 = ((x as isize + hi) as usize).min(w - 1) + 1;
            let s = sum[y1 * stride + x1] - sum[y0 * stride + x1] - sum[y1 * stride + x0] + sum[y0 * stride + x0];
            let c = cnt[y1 * stride + x1] + cnt[y0 * stride + x0] - cnt[y0 * stride + x1] - cnt[y1 * stride + x0];
            out[y * w + x] = s / f64::from(c);
        }
    }
    out
}

fn score_raster(enhanced: &Enhanced, scores: Vec<f64>) -> ScoreImage {
    ScoreImage {
        width: enhanced.image.width(),
        height: enhanced.image.height(),
        scores,
        mask: enhanced.mask.clone(),
        frame: enhanced.frame,
    }
}

/// Single-window score image of an already enhanced image.
pub fn score_enhanced(enhanced: &Enhanced, model: &TrainedMassModel, cfg: &MassConfig) -> ScoreImage {
    let raw = normalized_scores(enhanced, model, cfg.knn_k);
    score_raster(enhanced, smooth_scores(&raw, &enhanced.mask, cfg.smooth_side))
}

/// Pixel-wise arithmetic mean of equally sized rasters.
pub fn mean_maps(maps: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = maps.first().ok_or_else(|| Error::Internal("no score maps to average".into()))?;
    if maps.iter().any(|m| m.len() != first.len()) {
        return Err(Error::Internal("score raster size mismatch".into()));
    }
    let k = maps.len() as f64;
    Ok((0..first.len()).map(|i| maps.iter().map(|m| m[i]).sum::<f64>() / k).collect())
}

/// Ensemble score image of an already enhanced image: mean of the
/// unsmoothed per-window maps, smoothed once.
pub fn score_enhanced_mcs(enhanced: &Enhanced, models: &[TrainedMassModel], cfg: &MassConfig) -> Result<ScoreImage> {
    if models.is_empty() {
        return Err(Error::InvalidConfig("ensemble needs at least one model".into()));
    }
    let maps: Vec<Vec<f64>> = models.iter().map(|m| normalized_scores(enhanced, m, cfg.knn_k)).collect();
    let mean = mean_maps(&maps)?;
    Ok(score_raster(enhanced, smooth_scores(&mean, &enhanced.mask, cfg.smooth_side)))
}

/// Enhance, score every breast pixel with `model`, normalize and smooth.
pub fn score_image(img: &GrayImage, model: &TrainedMassModel, cfg: &MassConfig) -> Result<ScoreImage> {
    cfg.validate()?;
    if cfg.patch_w1 != model.patch_w1 {
        return Err(Error::InvalidConfig(format!(
            "model window {} differs from configured window {}",
            model.patch_w1, cfg.patch_w1
        )));
    }
    model.validate()?;
    let enhanced = enhance_image(img, &model.enhance_cfg)?;
    Ok(score_enhanced(&enhanced, model, cfg))
}

/// Multi-window ensemble score image.
pub fn score_image_mcs(img: &GrayImage, models: &[TrainedMassModel], cfg: &MassConfig) -> Result<ScoreImage> {
    cfg.validate()?;
    let first = models
        .first()
        .ok_or_else(|| Error::InvalidConfig("ensemble needs at least one model".into()))?;
    for m in models {
        m.validate()?;
        if m.enhance_cfg != first.enhance_cfg {
            return Err(Error::InvalidConfig("ensemble models differ in enhancement settings".into()));
        }
    }
    let enhanced = enhance_image(img, &first.enhance_cfg)?;
    score_enhanced_mcs(&enhanced, models, cfg)
}

#[cfg(test)]
mod tests;
