//! Layered run settings: built-in defaults, then a `key=value` config file,
//! then command-line flags.

use std::path::Path;

use lhscad::enhance::EnhanceConfig;
use lhscad::massdetect::MassConfig;
use lhscad::mcdetect::McConfig;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub threads: Option<usize>,
    pub enhance: EnhanceConfig,
    pub mass: MassConfig,
    /// Minimum smoothed score of a reported mass marker.
    pub mass_threshold: f64,
    pub mc: McConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            enhance: EnhanceConfig::default(),
            mass: MassConfig::default(),
            mass_threshold: 0.0,
            mc: McConfig::default(),
        }
    }
}

/// Every key accepted by [`Settings::set`].
pub const KEYS: &[&str] = &[
    "seed",
    "threads",
    "enhance.window",
    "enhance.lambda",
    "enhance.height",
    "enhance.target",
    "segment.stop_fraction",
    "segment.max_iterations",
    "mass.w1",
    "mass.r",
    "mass.c",
    "mass.k",
    "mass.smooth",
    "mass.windows",
    "mass.max_iterations",
    "mass.sample_cap",
    "mass.threshold",
    "mc.w2",
    "mc.th",
    "mc.height",
    "mc.merge_mm",
    "mc.min_foci",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<usize>, String> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

impl Settings {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let v = v.trim();
        match key {
            "seed" => self.seed = num(key, v)?,
            "threads" => self.threads = Some(num(key, v)?),
            "enhance.window" => self.enhance.window = num(key, v)?,
            "enhance.lambda" => self.enhance.lambda = num(key, v)?,
            "enhance.height" => self.enhance.target_height = num(key, v)?,
            "enhance.target" => self.enhance.target_family = v.parse().map_err(|e| format!("{e}"))?,
            "segment.stop_fraction" => self.enhance.segmentation.stop_fraction = num(key, v)?,
            "segment.max_iterations" => self.enhance.segmentation.max_iterations = num(key, v)?,
            "mass.w1" => self.mass.patch_w1 = num(key, v)?,
            "mass.r" => self.mass.centroids_r = num(key, v)?,
            "mass.c" => self.mass.pca_c = num(key, v)?,
            "mass.k" => self.mass.knn_k = num(key, v)?,
            "mass.smooth" => self.mass.smooth_side = num(key, v)?,
            "mass.windows" => self.mass.mcs_windows = parse_list(key, v)?,
            "mass.max_iterations" => self.mass.kmeans_max_iterations = num(key, v)?,
            "mass.sample_cap" => {
                self.mass.kmeans_sample_cap = if v == "none" { None } else { Some(num(key, v)?) }
            }
            "mass.threshold" => self.mass_threshold = num(key, v)?,
            "mc.w2" => self.mc.inner_w2 = num(key, v)?,
            "mc.th" => self.mc.threshold_th = num(key, v)?,
            "mc.height" => self.mc.target_height = num(key, v)?,
            "mc.merge_mm" => self.mc.merge_distance_mm = num(key, v)?,
            "mc.min_foci" => self.mc.min_foci_per_cluster = num(key, v)?,
            _ => return Err(format!("unknown setting {key:?}; known keys: {}", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and lines starting with `#`
    /// are ignored.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), String> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{origin}:{}: expected key=value", i + 1))?;
            self.set(k.trim(), v).map_err(|e| format!("{origin}:{}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Propagates the shared enhancement settings into the stage configs
    /// and validates everything.
    pub fn finish(mut self) -> Result<Self, String> {
        self.mass.enhance = self.enhance;
        self.mc.enhance = self.enhance;
        if self.threads == Some(0) {
            return Err("threads must be at least 1".into());
        }
        if !self.mass_threshold.is_finite() {
            return Err("mass.threshold must be finite".into());
        }
        self.mass.validate().map_err(|e| e.to_string())?;
        self.mc.validate().map_err(|e| e.to_string())?;
        Ok(self)
    }
}
