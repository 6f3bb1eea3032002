//! Trained mass model and its on-disk container.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MassConfig;
use crate::enhance::EnhanceConfig;
use crate::error::{Error, Result};

/// Centroids of mass and normal patches, projected onto the leading
/// principal directions of the stacked unprojected centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedMassModel {
    pub patch_w1: usize,
    /// Mean of the stacked centroids, subtracted before projection.
    pub pc_mean: Vec<f64>,
    pub pc_basis: Vec<Vec<f64>>,
    pub mass_centroids: Vec<Vec<f64>>,
    pub normal_centroids: Vec<Vec<f64>>,
    pub training_image_count: usize,
    pub enhance_cfg: EnhanceConfig,
}

impl TrainedMassModel {
    pub fn components(&self) -> usize {
        self.pc_basis.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.patch_w1 * self.patch_w1;
        let bad = |m: &str| Err(Error::ModelFormat(m.to_string()));
        if self.pc_mean.len() != dim || self.pc_basis.iter().any(|b| b.len() != dim) {
            return bad("principal basis does not match the patch size");
        }
        let c = self.components();
        if c == 0 {
            return bad("empty principal basis");
        }
        if self.mass_centroids.is_empty() || self.normal_centroids.is_empty() {
            return bad("empty centroid list");
        }
        if self.mass_centroids.iter().chain(&self.normal_centroids).any(|r| r.len() != c) {
            return bad("centroid width differs from the component count");
        }
        for (i, a) in self.pc_basis.iter().enumerate() {
            for (j, b) in self.pc_basis.iter().enumerate().skip(i) {
                let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                if (d - if i == j { 1.0 } else { 0.0 }).abs() > 1e-9 {
                    return bad("principal basis is not orthonormal");
                }
            }
        }
        Ok(())
    }

    /// Projects a raw `w1 x w1` patch onto the principal basis.
    pub fn project_patch(&self, patch: &[u8], out: &mut [f64]) {
        for (o, b) in out.iter_mut().zip(&self.pc_basis) {
            *o = patch
                .iter()
                .zip(b.iter().zip(&self.pc_mean))
                .map(|(&x, (b, m))| b * (f64::from(x) - m))
                .sum();
        }
    }
}

pub const MODEL_FORMAT: &str = "lhscad-mass-model";
pub const MODEL_VERSION: u32 = 1;

/// Contents of a model file: the configuration used for training and one
/// model per patch window (a single entry unless trained for the ensemble).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config: MassConfig,
    pub seed: u64,
    pub models: Vec<TrainedMassModel>,
}

impl ModelFile {
    pub fn new(config: MassConfig, seed: u64, models: Vec<TrainedMassModel>) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config,
            seed,
            models,
        }
    }

    /// Model for the configured single patch window.
    pub fn primary(&self) -> Result<&TrainedMassModel> {
        self.window(self.config.patch_w1)
    }

    pub fn window(&self, w1: usize) -> Result<&TrainedMassModel> {
        self.models
            .iter()
            .find(|m| m.patch_w1 == w1)
            .ok_or_else(|| Error::ModelFormat(format!("no model for window {w1}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("model serializes");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_slice(bytes).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", file.version)));
        }
        if file.models.is_empty() {
            return Err(Error::ModelFormat("no models".into()));
        }
        file.config.validate()?;
        for m in &file.models {
            m.validate()?;
        }
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
