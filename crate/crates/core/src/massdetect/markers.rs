//! Detection markers and local-maximum extraction from score images.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScoreImage;
use crate::error::{Error, Result};
use crate::imgcore::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

impl Marker {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Markers in original-image pixel coordinates, highest score first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerSet {
    pub markers: Vec<Marker>,
}

impl MarkerSet {
    /// Sorts by score descending; equal scores keep their order.
    pub fn new(mut markers: Vec<Marker>) -> Self {
        markers.sort_by(|a, b| b.score.total_cmp(&a.score));
        Self { markers }
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    /// Markers whose score reaches `threshold`.
    pub fn at_threshold(&self, threshold: f64) -> MarkerSet {
        MarkerSet {
            markers: self.markers.iter().copied().filter(|m| m.score >= threshold).collect(),
        }
    }

    /// One `x y score` line per marker.
    pub fn to_text(&self) -> String {
        self.markers
            .iter()
            .map(|m| format!("{} {} {}\n", m.x, m.y, m.score))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut markers = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Annotation(format!("marker line {}: {e}", i + 1)))?;
            if f.len() != 3 {
                return Err(Error::Annotation(format!("marker line {}: expected x y score", i + 1)));
            }
            markers.push(Marker {
                x: f[0],
                y: f[1],
                score: f[2],
            });
        }
        Ok(Self::new(markers))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Maximal plateaus of the score image inside the mask: 8-connected sets of
/// equal-valued breast pixels whose every outside neighbor is strictly
/// lower (pixels outside the mask count as 0). Each plateau with value at
/// least `threshold` yields one marker at its centroid, snapped to the
/// nearest plateau pixel when the centroid falls outside it, and mapped to
/// the original image frame.
pub fn find_markers(score_img: &ScoreImage, threshold: f64) -> MarkerSet {
    let (w, h) = (score_img.width, score_img.height);
    let mask = score_img.mask.as_slice();
    let s = &score_img.scores;
    let value = |i: usize| if mask[i] { s[i] } else { 0.0 };
    let neighbors = |i: usize| {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        (-1isize..=1)
            .flat_map(move |dy| (-1isize..=1).map(move |dx| (dx, dy)))
            .filter(|&d| d != (0, 0))
            .filter_map(move |(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h)
                    .then(|| ny as usize * w + nx as usize)
            })
    };

    let mut visited = vec![false; w * h];
    let mut markers = Vec::new();
    let mut stack = Vec::new();
    let mut plateau = Vec::new();
    for start in 0..w * h {
        if !mask[start] || visited[start] || s[start] < threshold {
            continue;
        }
        let v = s[start];
        if neighbors(start).any(|n| value(n) > v) {
            continue;
        }
        let mut is_max = true;
        plateau.clear();
        stack.push(start);
        visited[start] = true;
        while let Some(i) = stack.pop() {
            plateau.push(i);
            for n in neighbors(i) {
                let nv = value(n);
                if nv > v {
                    is_max = false;
                } else if nv == v && mask[n] && !visited[n] {
                    visited[n] = true;
                    stack.push(n);
                }
            }
        }
        if !is_max {
            continue;
        }
        plateau.sort_unstable();
        let k = plateau.len() as f64;
        let cx = plateau.iter().map(|&i| (i % w) as f64).sum::<f64>() / k;
        let cy = plateau.iter().map(|&i| (i / w) as f64).sum::<f64>() / k;
        let (rx, ry) = (cx.round(), cy.round());
        let inside = rx >= 0.0 && ry >= 0.0 && plateau.binary_search(&(ry as usize * w + rx as usize)).is_ok();
        let p = if inside {
            Point::new(cx, cy)
        } else {
            let c = Point::new(cx, cy);
            let near = plateau
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let pa = Point::new((a % w) as f64, (a / w) as f64);
                    let pb = Point::new((b % w) as f64, (b / w) as f64);
                    pa.distance(&c).total_cmp(&pb.distance(&c)).then(a.cmp(&b))
                })
                .expect("plateau is non-empty");
            Point::new((near % w) as f64, (near / w) as f64)
        };
        let o = score_img.frame.to_original(p);
        markers.push(Marker {
            x: o.x,
            y: o.y,
            score: v,
        });
    }
    MarkerSet::new(markers)
}
