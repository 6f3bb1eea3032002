//! Detection accuracy: true-positive fractions under case, side, image and
//! label units, false markers per normal image, FROC sweeps and the
//! Mann-Whitney AUC of a score image.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::massdetect::{MarkerSet, ScoreImage};
use crate::phantom::{AnnotationSet, Side, ViewKind};

/// Unit of the true-positive fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TpfCriterion {
    /// A positive case is detected if any of its lesions is detected in any view.
    PerCase,
    /// A positive side is detected if any lesion is detected in either view.
    PerSide,
    /// A positive view is detected if any of its lesions is detected.
    PerImage,
    /// Every lesion label is its own unit.
    PerLabel,
}

impl TpfCriterion {
    pub const ALL: [TpfCriterion; 4] = [Self::PerCase, Self::PerSide, Self::PerImage, Self::PerLabel];

    pub fn name(self) -> &'static str {
        match self {
            Self::PerCase => "per-case",
            Self::PerSide => "per-side",
            Self::PerImage => "per-image",
            Self::PerLabel => "per-label",
        }
    }
}

impl std::str::FromStr for TpfCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown criterion {s:?}")))
    }
}

/// One mammographic view and its ground truth, in the frame its markers use.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewRecord {
    pub side: Side,
    pub view: ViewKind,
    pub annotations: AnnotationSet,
}

impl ViewRecord {
    pub fn is_positive(&self) -> bool {
        !self.annotations.is_empty()
    }
}

/// All views of one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub case_id: String,
    pub views: Vec<ViewRecord>,
}

impl CaseRecord {
    pub fn is_positive(&self) -> bool {
        self.views.iter().any(ViewRecord::is_positive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tpf: f64,
    pub fm_per_image: f64,
    pub criterion: TpfCriterion,
}

/// Labels hit by at least one marker, and markers inside no label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub detected: BTreeSet<u32>,
    pub false_markers: usize,
}

/// A marker is a true positive when it lies inside (boundary included) any
/// label; each label counts once however many markers hit it.
pub fn match_markers(markers: &MarkerSet, annotations: &AnnotationSet) -> MatchResult {
    let mut out = MatchResult::default();
    for m in &markers.markers {
        let hits: Vec<u32> = annotations
            .labels
            .iter()
            .filter(|l| l.contains(m.point()))
            .map(|l| l.id)
            .collect();
        if hits.is_empty() {
            out.false_markers += 1;
        }
        out.detected.extend(hits);
    }
    out
}

fn check_shape(cases: &[CaseRecord], detections: &[Vec<MarkerSet>]) -> Result<()> {
    if cases.len() != detections.len() || cases.iter().zip(detections).any(|(c, d)| c.views.len() != d.len()) {
        return Err(Error::InvalidConfig("detections do not line up with case views".into()));
    }
    Ok(())
}

/// Fraction of positive units with at least one detected lesion.
/// `detections[c][v]` holds the markers of `cases[c].views[v]`.
pub fn tpf(cases: &[CaseRecord], detections: &[Vec<MarkerSet>], criterion: TpfCriterion) -> Result<f64> {
    check_shape(cases, detections)?;
    let (mut units, mut hit) = (0usize, 0usize);
    for (case, dets) in cases.iter().zip(detections) {
        let matched: Vec<(&ViewRecord, MatchResult)> = case
            .views
            .iter()
            .zip(dets)
            .map(|(v, m)| (v, match_markers(m, &v.annotations)))
            .collect();
        match criterion {
            TpfCriterion::PerLabel => {
                for (v, r) in &matched {
                    units += v.annotations.len();
                    hit += v.annotations.labels.iter().filter(|l| r.detected.contains(&l.id)).count();
                }
            }
            TpfCriterion::PerImage => {
                for (v, r) in &matched {
                    if v.is_positive() {
                        units += 1;
                        hit += usize::from(!r.detected.is_empty());
                    }
                }
            }
            TpfCriterion::PerSide => {
                let mut sides: BTreeMap<Side, (bool, bool)> = BTreeMap::new();
                for (v, r) in &matched {
                    let e = sides.entry(v.side).or_default();
                    e.0 |= v.is_positive();
                    e.1 |= !r.detected.is_empty();
                }
                for (positive, detected) in sides.into_values() {
                    if positive {
                        units += 1;
                        hit += usize::from(detected);
                    }
                }
            }
            TpfCriterion::PerCase => {
                if case.is_positive() {
                    units += 1;
                    hit += usize::from(matched.iter().any(|(_, r)| !r.detected.is_empty()));
                }
            }
        }
    }
    if units == 0 {
        return Err(Error::UndefinedTpf);
    }
    Ok(hit as f64 / units as f64)
}

/// Total false markers over lesion-free views divided by their number.
pub fn fm_per_image(cases: &[CaseRecord], detections: &[Vec<MarkerSet>]) -> Result<f64> {
    check_shape(cases, detections)?;
    let (mut views, mut fm) = (0usize, 0usize);
    for (case, dets) in cases.iter().zip(detections) {
        for (v, m) in case.views.iter().zip(dets) {
            if !v.is_positive() {
                views += 1;
                fm += match_markers(m, &v.annotations).false_markers;
            }
        }
    }
    if views == 0 {
        return Err(Error::NoNormalViews);
    }
    Ok(fm as f64 / views as f64)
}

/// One operating point per threshold, with detections produced by
/// `detect(threshold)`. Thresholds must be sorted descending.
pub fn froc_sweep(
    cases: &[CaseRecord],
    mut detect: impl FnMut(f64) -> Result<Vec<Vec<MarkerSet>>>,
    thresholds: &[f64],
    criterion: TpfCriterion,
) -> Result<Vec<OperatingPoint>> {
    if thresholds.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig("thresholds must be sorted descending".into()));
    }
    thresholds
        .iter()
        .map(|&t| {
            let d = detect(t)?;
            Ok(OperatingPoint {
                threshold: t,
                tpf: tpf(cases, &d, criterion)?,
                fm_per_image: fm_per_image(cases, &d)?,
                criterion,
            })
        })
        .collect()
}

/// FROC sweep over scored markers: at each threshold only markers scoring
/// at least the threshold are kept.
pub fn froc_from_markers(
    cases: &[CaseRecord],
    detections: &[Vec<MarkerSet>],
    thresholds: &[f64],
    criterion: TpfCriterion,
) -> Result<Vec<OperatingPoint>> {
    froc_sweep(
        cases,
        |t| Ok(detections.iter().map(|c| c.iter().map(|m| m.at_threshold(t)).collect()).collect()),
        thresholds,
        criterion,
    )
}

/// Best TPF among operating points with at most `max_fm` false markers per
/// image (0 when none qualifies).
pub fn tpf_at_fm(points: &[OperatingPoint], max_fm: f64) -> f64 {
    points
        .iter()
        .filter(|p| p.fm_per_image <= max_fm)
        .map(|p| p.tpf)
        .fold(0.0, f64::max)
}

/// Probability that a malignant score exceeds a normal one, ties counted
/// one half, computed from midranks of the pooled sample.
pub fn auc_mann_whitney(normal: &[f64], malignant: &[f64]) -> Result<f64> {
    if normal.is_empty() {
        return Err(Error::EmptyRegion("normal"));
    }
    if malignant.is_empty() {
        return Err(Error::EmptyRegion("malignant"));
    }
    let mut pooled: Vec<(f64, bool)> = normal
        .iter()
        .map(|&x| (x, false))
        .chain(malignant.iter().map(|&y| (y, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the rank sum of the malignant sample, kept integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share the midrank (i + 1 + j) / 2.
        let ys = pooled[i..j].iter().filter(|e| e.1).count() as u128;
        twice_rank_sum += ys * (i + 1 + j) as u128;
        i = j;
    }
    let (n1, n2) = (normal.len() as u128, malignant.len() as u128);
    let twice_u = twice_rank_sum - n2 * (n2 + 1);
    Ok(twice_u as f64 / (2 * n1 * n2) as f64)
}

/// AUC separating the breast pixels of `score_img` inside any annotation
/// (given in the original frame) from the remaining breast pixels.
pub fn score_auc(score_img: &ScoreImage, annotations: &AnnotationSet) -> Result<f64> {
    let frame = score_img.frame;
    let lesion = annotations
        .map_points(|p| frame.to_scaled(p))
        .rasterize(score_img.width, score_img.height, None);
    let (mut normal, mut malignant) = (Vec::new(), Vec::new());
    for (i, (&s, &m)) in score_img.scores.iter().zip(score_img.mask.as_slice()).enumerate() {
        if m {
            if lesion[i] {
                malignant.push(s);
            } else {
                normal.push(s);
            }
        }
    }
    auc_mann_whitney(&normal, &malignant)
}
