//! Ground-truth lesion outlines and their text file format.
//!
//! ```text
//! # lhscad annotations v1
//! label 1 mass 4 10.5,20 30,20 30,40.25
//! label 2 microcalc - 5,5 7,5 7,7 5,7
//! ```
//! Each `label` line carries an id, a kind, a BI-RADS category (`-` when
//! absent) and at least three `x,y` vertices of a simple closed polygon.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::Point;

const HEADER: &str = "# lhscad annotations v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LesionKind {
    Mass,
    Microcalc,
}

impl LesionKind {
    fn as_str(self) -> &'static str {
        match self {
            LesionKind::Mass => "mass",
            LesionKind::Microcalc => "microcalc",
        }
    }
}

impl std::str::FromStr for LesionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mass" => Ok(Self::Mass),
            "microcalc" => Ok(Self::Microcalc),
            other => Err(Error::Annotation(format!("unknown lesion kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lesion {
    pub id: u32,
    pub kind: LesionKind,
    pub boundary: Vec<Point>,
    pub birads: Option<u8>,
}

impl Lesion {
    pub fn new(id: u32, kind: LesionKind, boundary: Vec<Point>, birads: Option<u8>) -> Result<Self> {
        let lesion = Self {
            id,
            kind,
            boundary,
            birads,
        };
        lesion.validate()?;
        Ok(lesion)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundary.len() < 3 {
            return Err(Error::Annotation(format!(
                "label {} has {} vertices; at least 3 required",
                self.id,
                self.boundary.len()
            )));
        }
        if let Some(b) = self.birads {
            if b > 5 {
                return Err(Error::Annotation(format!("label {} has BI-RADS {b}", self.id)));
            }
        }
        if !is_simple(&self.boundary) {
            return Err(Error::Annotation(format!("label {} polygon self-intersects", self.id)));
        }
        Ok(())
    }

    /// Boundary-inclusive even-odd point-in-polygon test.
    pub fn contains(&self, p: Point) -> bool {
        point_in_polygon(&self.boundary, p)
    }

    pub fn centroid(&self) -> Point {
        let n = self.boundary.len() as f64;
        let (sx, sy) = self
            .boundary
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / n, sy / n)
    }

    /// `(min_x, min_y, max_x, max_y)` of the outline.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.boundary.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub labels: Vec<Lesion>,
}

impl AnnotationSet {
    pub fn new(labels: Vec<Lesion>) -> Self {
        Self { labels }
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn of_kind(&self, kind: LesionKind) -> AnnotationSet {
        AnnotationSet {
            labels: self.labels.iter().filter(|l| l.kind == kind).cloned().collect(),
        }
    }

    pub fn has_kind(&self, kind: LesionKind) -> bool {
        self.labels.iter().any(|l| l.kind == kind)
    }

    /// Applies a coordinate transform to every vertex.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> AnnotationSet {
        AnnotationSet {
            labels: self
                .labels
                .iter()
                .map(|l| Lesion {
                    boundary: l.boundary.iter().map(|&p| f(p)).collect(),
                    ..l.clone()
                })
                .collect(),
        }
    }

    /// Row-major raster of pixel centers lying inside any label of `kind`
    /// (or any label when `kind` is `None`).
    pub fn rasterize(&self, width: usize, height: usize, kind: Option<LesionKind>) -> Vec<bool> {
        let mut out = vec![false; width * height];
        for label in self.labels.iter().filter(|l| kind.map_or(true, |k| l.kind == k)) {
            let (x0, y0, x1, y1) = label.bounds();
            let (wf, hf) = (width as f64 - 1.0, height as f64 - 1.0);
            if x1 < 0.0 || y1 < 0.0 || x0 > wf || y0 > hf {
                continue;
            }
            let xs = x0.ceil().max(0.0) as usize..=x1.floor().min(wf) as usize;
            let ys = y0.ceil().max(0.0) as usize..=y1.floor().min(hf) as usize;
            for y in ys {
                for x in xs.clone() {
                    if !out[y * width + x] && label.contains(Point::new(x as f64, y as f64)) {
                        out[y * width + x] = true;
                    }
                }
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(HEADER);
        s.push('\n');
        for l in &self.labels {
            let birads = l.birads.map_or_else(|| "-".to_string(), |b| b.to_string());
            let _ = write!(s, "label {} {} {}", l.id, l.kind.as_str(), birads);
            for p in &l.boundary {
                let _ = write!(s, " {},{}", p.x, p.y);
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Annotation(format!("line {}: {what}", lineno + 1));
            let mut fields = line.split_whitespace();
            if fields.next() != Some("label") {
                return Err(bad("expected `label`"));
            }
            let id = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("bad label id"))?;
            let kind: LesionKind = fields.next().ok_or_else(|| bad("missing kind"))?.parse()?;
            let birads = match fields.next().ok_or_else(|| bad("missing BI-RADS"))? {
                "-" => None,
                b => Some(b.parse().map_err(|_| bad("bad BI-RADS"))?),
            };
            let boundary = fields
                .map(|v| {
                    let (x, y) = v.split_once(',').ok_or_else(|| bad("bad vertex"))?;
                    Ok(Point::new(
                        x.parse().map_err(|_| bad("bad x"))?,
                        y.parse().map_err(|_| bad("bad y"))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            labels.push(Lesion::new(id, kind, boundary, birads)?);
        }
        Ok(Self { labels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::imgcore::write_atomic(path, self.to_text().as_bytes())
    }
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let scale = (b.x - a.x).abs().max((b.y - a.y).abs()).max(1.0);
    cross.abs() <= 1e-9 * scale
        && p.x >= a.x.min(b.x) - 1e-12
        && p.x <= a.x.max(b.x) + 1e-12
        && p.y >= a.y.min(b.y) - 1e-12
        && p.y <= a.y.max(b.y) + 1e-12
}

pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if on_segment(a, b, p) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True when no two non-adjacent edges of the closed polygon touch.
pub fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}
