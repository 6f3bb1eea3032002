//! Multi-view phantom corpora with a delimited manifest.
//!
//! Manifest (`manifest.tsv`), one record per view:
//! `case_id  side  view  image  annotation  status` with side `L`/`R`, view
//! `CC`/`MLO`, paths relative to the manifest directory and status
//! `positive`/`normal`.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{generate_phantom, BreastShape, MassSpec, PhantomSpec, SpeckSpec};
use crate::error::{Error, Result};
use crate::imgcore::{save_image, Pixel, Point};

pub const MANIFEST_FILE: &str = "manifest.tsv";
const MANIFEST_HEADER: &str = "case_id\tside\tview\timage\tannotation\tstatus";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl Difficulty {
    /// Mass peak contrast in units of the background texture sigma.
    pub fn mass_contrast_sigmas(self) -> f64 {
        match self {
            Difficulty::Easy => 3.0,
            Difficulty::Hard => 1.5,
        }
    }

    /// Speck contrast in units of the background texture sigma.
    pub fn speck_contrast_sigmas(self) -> f64 {
        match self {
            Difficulty::Easy => 6.0,
            Difficulty::Hard => 3.0,
        }
    }
}

impl std::str::FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Self::Easy),
            "hard" => Ok(Self::Hard),
            other => Err(Error::InvalidConfig(format!("unknown difficulty {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewKind {
    Cc,
    Mlo,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::L => "L",
            Side::R => "R",
        })
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewKind::Cc => "CC",
            ViewKind::Mlo => "MLO",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" => Ok(Side::L),
            "R" => Ok(Side::R),
            _ => Err(Error::Manifest(format!("bad side {s:?}"))),
        }
    }
}

impl std::str::FromStr for ViewKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CC" => Ok(ViewKind::Cc),
            "MLO" => Ok(ViewKind::Mlo),
            _ => Err(Error::Manifest(format!("bad view {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedView {
    pub case_id: String,
    pub side: Side,
    pub view: ViewKind,
    pub positive: bool,
    pub spec: PhantomSpec,
}

impl PlannedView {
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.case_id, self.side, self.view)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPlan {
    pub views: Vec<PlannedView>,
}

/// Number of micro-calcification specks injected per positive view.
pub const SPECKS_PER_CLUSTER: usize = 5;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lesion layouts cycled over positive cases; each entry is
/// `(side, view, number of masses)`. Together they exercise every TPF
/// criterion: a view with two lesions, a side seen in two views, and a case
/// with two positive sides.
const POSITIVE_PATTERNS: [&[(Side, ViewKind, usize)]; 4] = [
    &[(Side::L, ViewKind::Cc, 1)],
    &[(Side::L, ViewKind::Cc, 1), (Side::L, ViewKind::Mlo, 1)],
    &[(Side::R, ViewKind::Mlo, 2)],
    &[(Side::L, ViewKind::Cc, 1), (Side::R, ViewKind::Cc, 1)],
];
const NORMAL_PATTERN: &[(Side, ViewKind, usize)] =
    &[(Side::L, ViewKind::Cc, 0), (Side::L, ViewKind::Mlo, 0)];

fn place_lesions(spec: &mut PhantomSpec, masses: usize, difficulty: Difficulty, rng: &mut ChaCha8Rng) {
    let spacing = spec.spacing_mm();
    let sigma = spec.background.noise_sigma;
    let breast = spec.breast;
    // Keeps lesions away from the skin line and the chest wall.
    let inner = |p: Point, margin_px: f64| {
        let shrunk = BreastShape {
            semi_axis_x: breast.semi_axis_x - margin_px,
            semi_axis_y: breast.semi_axis_y - margin_px,
            center_y: breast.center_y,
        };
        p.x >= margin_px && shrunk.contains(p)
    };
    let sample = |margin_px: f64, rng: &mut ChaCha8Rng| loop {
        let p = Point::new(
            rng.gen_range(0.0..breast.semi_axis_x),
            rng.gen_range(breast.center_y - breast.semi_axis_y..breast.center_y + breast.semi_axis_y),
        );
        if inner(p, margin_px) {
            return p;
        }
    };
    let mut placed: Vec<(Point, f64)> = Vec::new();
    while placed.len() < masses {
        let radius_mm = rng.gen_range(7.0..11.0);
        let r = radius_mm / spacing;
        let c = sample(r + 8.0 / spacing, rng);
        if placed.iter().all(|(q, rq)| c.distance(q) > r + rq + 10.0 / spacing) {
            placed.push((c, r));
            spec.masses.push(MassSpec {
                center: c,
                radius_mm,
                contrast: difficulty.mass_contrast_sigmas() * sigma,
                edge_softness_mm: 1.0,
            });
        }
    }
    if masses == 0 {
        return;
    }
    let spread = 1.5 / spacing;
    let min_gap = 0.6 / spacing;
    let center = loop {
        let c = sample(12.0 / spacing, rng);
        if placed.iter().all(|(q, rq)| c.distance(q) > rq + 12.0 / spacing) {
            break c;
        }
    };
    let mut specks: Vec<Point> = Vec::new();
    while specks.len() < SPECKS_PER_CLUSTER {
        let p = Point::new(
            (center.x + rng.gen_range(-spread..spread)).round(),
            (center.y + rng.gen_range(-spread..spread)).round(),
        );
        if p.distance(&center) <= spread && specks.iter().all(|q| p.distance(q) >= min_gap) {
            specks.push(p);
        }
    }
    spec.specks.extend(specks.iter().map(|p| SpeckSpec {
        center: Pixel::new(p.x as usize, p.y as usize),
        contrast: difficulty.speck_contrast_sigmas() * sigma,
        size: 2,
    }));
}

/// Deterministic layout of a corpus: `n_positive` lesion cases followed by
/// `n_normal` lesion-free cases, every view `width x height` pixels.
pub fn plan_corpus(
    n_positive: usize,
    n_normal: usize,
    difficulty: Difficulty,
    seed: u64,
    width: usize,
    height: usize,
) -> CorpusPlan {
    let mut views = Vec::new();
    let cases = (0..n_positive)
        .map(|i| (format!("P{i:03}"), POSITIVE_PATTERNS[i % POSITIVE_PATTERNS.len()], true))
        .chain((0..n_normal).map(|i| (format!("N{i:03}"), NORMAL_PATTERN, false)));
    for (case_id, pattern, positive) in cases {
        for &(side, view, masses) in pattern {
            let view_seed = splitmix(seed ^ splitmix(views.len() as u64 + 1));
            let mut spec = PhantomSpec::blank(width, height, view_seed);
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix(view_seed));
            place_lesions(&mut spec, masses, difficulty, &mut rng);
            views.push(PlannedView {
                case_id: case_id.clone(),
                side,
                view,
                positive,
                spec,
            });
        }
    }
    CorpusPlan { views }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub case_id: String,
    pub side: Side,
    pub view: ViewKind,
    pub image: PathBuf,
    pub annotation: PathBuf,
    pub positive: bool,
}

/// Generates every planned view into `dir` as 12-bit PGM plus annotation
/// text, and writes the manifest. Returns the manifest records.
pub fn make_corpus(dir: impl AsRef<Path>, plan: &CorpusPlan) -> Result<Vec<ManifestRecord>> {
    use rayon::prelude::*;

    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let records = plan
        .views
        .par_iter()
        .map(|v| {
            let phantom = generate_phantom(&v.spec)?;
            let image = PathBuf::from(format!("{}.pgm", v.stem()));
            let annotation = PathBuf::from(format!("{}.ann", v.stem()));
            save_image(dir.join(&image), &phantom.image)?;
            phantom.annotations.save(dir.join(&annotation))?;
            Ok(ManifestRecord {
                case_id: v.case_id.clone(),
                side: v.side,
                view: v.view,
                image,
                annotation,
                positive: v.positive,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = dir.join(MANIFEST_FILE);
    crate::imgcore::write_atomic(&path, manifest_text(&records).as_bytes())?;
    Ok(records)
}

pub fn manifest_text(records: &[ManifestRecord]) -> String {
    let mut s = format!("{MANIFEST_HEADER}\n");
    for r in records {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.case_id,
            r.side,
            r.view,
            r.image.display(),
            r.annotation.display(),
            if r.positive { "positive" } else { "normal" }
        ));
    }
    s
}

/// Reads a manifest; image and annotation paths are resolved against the
/// manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("case_id") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(Error::Manifest(format!("line {}: expected 6 fields", i + 1)));
        }
        let positive = match f[5] {
            "positive" => true,
            "normal" => false,
            s => return Err(Error::Manifest(format!("line {}: bad status {s:?}", i + 1))),
        };
        out.push(ManifestRecord {
            case_id: f[0].to_string(),
            side: f[1].parse()?,
            view: f[2].parse()?,
            image: base.join(f[3]),
            annotation: base.join(f[4]),
            positive,
        });
    }
    Ok(out)
}
