//! Synthetic mammogram-like phantoms with exact ground truth.

mod annotation;
mod corpus;

pub use annotation::{is_simple, point_in_polygon, AnnotationSet, Lesion, LesionKind};
pub use corpus::{
    make_corpus, plan_corpus, read_manifest, CorpusPlan, Difficulty, ManifestRecord, PlannedView,
    Side, ViewKind, MANIFEST_FILE,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{max_level, BreastMask, GrayImage, Pixel, Point};

/// Half-ellipse breast attached to the left image edge (the chest wall).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreastShape {
    /// Horizontal extent from the chest wall, in pixels.
    pub semi_axis_x: f64,
    /// Vertical half-extent, in pixels.
    pub semi_axis_y: f64,
    pub center_y: f64,
}

impl BreastShape {
    /// Proportions used by the corpus generator.
    pub fn standard(width: usize, height: usize) -> Self {
        Self {
            semi_axis_x: 0.88 * width as f64,
            semi_axis_y: 0.46 * height as f64,
            center_y: 0.5 * height as f64,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.depth(p) <= 1.0 && p.x >= 0.0
    }

    /// Normalized elliptical radius; 1 on the skin line.
    fn depth(&self, p: Point) -> f64 {
        let (u, v) = (p.x / self.semi_axis_x, (p.y - self.center_y) / self.semi_axis_y);
        u * u + v * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub base_level: f64,
    /// Side of the moving-average kernel applied to white noise, in pixels.
    pub correlation_length_px: usize,
    /// Standard deviation of the textured background, in gray levels.
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSpec {
    pub center: Point,
    pub radius_mm: f64,
    /// Peak added intensity, in gray levels.
    pub contrast: f64,
    /// Width of the logistic edge, in millimeters.
    pub edge_softness_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckSpec {
    /// Top-left pixel of the speck.
    pub center: Pixel,
    pub contrast: f64,
    /// Side of the square impulse: 1 or 2 pixels.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub background: BackgroundSpec,
    pub breast: BreastShape,
    pub masses: Vec<MassSpec>,
    pub specks: Vec<SpeckSpec>,
    /// Defaults to the image's derived spacing when absent.
    pub pixel_spacing_mm: Option<f64>,
    pub seed: u64,
}

impl PhantomSpec {
    /// A lesion-free phantom with the standard breast outline.
    pub fn blank(width: usize, height: usize, seed: u64) -> Self {
        Self {
            width,
            height,
            bit_depth: 12,
            background: BackgroundSpec {
                base_level: 1800.0,
                correlation_length_px: (height / 48).max(2),
                noise_sigma: 80.0,
            },
            breast: BreastShape::standard(width, height),
            masses: Vec::new(),
            specks: Vec::new(),
            pixel_spacing_mm: None,
            seed,
        }
    }

    pub fn spacing_mm(&self) -> f64 {
        self.pixel_spacing_mm.unwrap_or(230.0 / self.height as f64)
    }

    /// Annotation outline of mass `i`: its half-contrast circle.
    fn mass_outline(&self, m: &MassSpec) -> Vec<Point> {
        const VERTICES: usize = 32;
        let r = m.radius_mm / self.spacing_mm();
        (0..VERTICES)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / VERTICES as f64;
                Point::new(m.center.x + r * a.cos(), m.center.y + r * a.sin())
            })
            .collect()
    }

    fn speck_outline(s: &SpeckSpec) -> Vec<Point> {
        const MARGIN: f64 = 2.0;
        let (x0, y0) = (s.center.x as f64 - MARGIN, s.center.y as f64 - MARGIN);
        let (x1, y1) = (
            (s.center.x + s.size - 1) as f64 + MARGIN,
            (s.center.y + s.size - 1) as f64 + MARGIN,
        );
        vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig("phantom dimensions must be positive".into()));
        }
        if !matches!(self.bit_depth, 8 | 10 | 12 | 16) {
            return Err(Error::InvalidConfig(format!("bit depth {}", self.bit_depth)));
        }
        if self.background.correlation_length_px == 0 || self.background.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("invalid background texture".into()));
        }
        for (i, m) in self.masses.iter().enumerate() {
            if !(m.contrast > 0.0 && m.radius_mm > 0.0 && m.edge_softness_mm >= 0.0) {
                return Err(Error::InvalidConfig(format!("mass {i} parameters")));
            }
            if !self.mass_outline(m).iter().all(|&p| self.breast.contains(p)) {
                return Err(Error::LesionOutsideBreast(format!("mass {i}")));
            }
        }
        for (i, s) in self.specks.iter().enumerate() {
            if !(s.contrast > 0.0 && matches!(s.size, 1 | 2)) {
                return Err(Error::InvalidConfig(format!("speck {i} parameters")));
            }
            if !Self::speck_outline(s).iter().all(|&p| self.breast.contains(p)) {
                return Err(Error::LesionOutsideBreast(format!("speck {i}")));
            }
        }
        Ok(())
    }
}

/// Generated image together with its exact ground truth.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: GrayImage,
    pub annotations: AnnotationSet,
    pub mask: BreastMask,
}

/// Separable moving average of length `len` over `noise` of size
/// `(w + len - 1) x (h + len - 1)`, returning the valid `w x h` part scaled
/// back to unit variance.
fn box_smooth(noise: &[f64], w: usize, h: usize, len: usize) -> Vec<f64> {
    let pw = w + len - 1;
    let ph = h + len - 1;
    let mut rows = vec![0.0; w * ph];
    for y in 0..ph {
        let src = &noise[y * pw..(y + 1) * pw];
        let mut acc: f64 = src[..len].iter().sum();
        rows[y * w] = acc;
        for x in 1..w {
            acc += src[x + len - 1] - src[x - 1];
            rows[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for x in 0..w {
        let mut acc: f64 = (0..len).map(|y| rows[y * w + x]).sum();
        out[x] = acc;
        for y in 1..h {
            acc += rows[(y + len - 1) * w + x] - rows[(y - 1) * w + x];
            out[y * w + x] = acc;
        }
    }
    let norm = 1.0 / len as f64;
    out.iter_mut().for_each(|v| *v *= norm);
    out
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let len = spec.background.correlation_length_px;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise: Vec<f64> = (0..(w + len - 1) * (h + len - 1))
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let texture = box_smooth(&noise, w, h, len);

    let mask = BreastMask::from_fn(w, h, |x, y| spec.breast.contains(Point::new(x as f64, y as f64)));
    let mut field: Vec<f64> = texture
        .iter()
        .zip(mask.as_slice())
        .map(|(&t, &inside)| {
            if inside {
                spec.background.base_level + spec.background.noise_sigma * t
            } else {
                0.0
            }
        })
        .collect();

    let spacing = spec.spacing_mm();
    let mut labels = Vec::new();
    let mut next_id = 1u32;
    for m in &spec.masses {
        let radius = m.radius_mm / spacing;
        let soft = (m.edge_softness_mm / spacing).max(1e-6);
        let reach = radius + 12.0 * soft;
        let x0 = (m.center.x - reach).floor().max(0.0) as usize;
        let x1 = ((m.center.x + reach).ceil() as usize).min(w - 1);
        let y0 = (m.center.y - reach).floor().max(0.0) as usize;
        let y1 = ((m.center.y + reach).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !mask.contains(x, y) {
                    continue;
                }
                let r = (x as f64 - m.center.x).hypot(y as f64 - m.center.y);
                field[y * w + x] += m.contrast / (1.0 + ((r - radius) / soft).exp());
            }
        }
        labels.push(Lesion::new(next_id, LesionKind::Mass, spec.mass_outline(m), Some(5))?);
        next_id += 1;
    }
    for s in &spec.specks {
        for dy in 0..s.size {
            for dx in 0..s.size {
                field[(s.center.y + dy) * w + s.center.x + dx] += s.contrast;
            }
        }
        labels.push(Lesion::new(
            next_id,
            LesionKind::Microcalc,
            PhantomSpec::speck_outline(s),
            Some(4),
        )?);
        next_id += 1;
    }

    let max = f64::from(max_level(spec.bit_depth));
    let pixels = field
        .iter()
        .zip(mask.as_slice())
        .map(|(&v, &inside)| if inside { v.round().clamp(1.0, max) as u16 } else { 0 })
        .collect();
    let mut image = GrayImage::new(w, h, spec.bit_depth, pixels)?;
    if let Some(s) = spec.pixel_spacing_mm {
        image = image.with_pixel_spacing_mm(s);
    }
    Ok(Phantom {
        image,
        annotations: AnnotationSet::new(labels),
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PhantomSpec {
        PhantomSpec::blank(200, 460, 9)
    }

    #[test]
    fn blank_has_no_labels_and_ellipse_mask() {
        let s = spec();
        let p = generate_phantom(&s).unwrap();
        assert!(p.annotations.is_empty());
        for y in 0..s.height {
            for x in 0..s.width {
                let inside = s.breast.contains(Point::new(x as f64, y as f64));
                assert_eq!(p.mask.contains(x, y), inside);
                assert_eq!(p.image.get(x, y) > 0, inside);
            }
        }
    }

    #[test]
    fn deterministic() {
        let mut s = spec();
        s.masses.push(MassSpec {
            center: Point::new(60.0, 230.0),
            radius_mm: 5.0,
            contrast: 300.0,
            edge_softness_mm: 1.0,
        });
        let (a, b) = (generate_phantom(&s).unwrap(), generate_phantom(&s).unwrap());
        assert_eq!(a.image, b.image);
        assert_eq!(a.annotations, b.annotations);
        s.seed += 1;
        assert_ne!(generate_phantom(&s).unwrap().image, a.image);
    }

    #[test]
    fn texture_has_requested_spread() {
        let s = spec();
        let p = generate_phantom(&s).unwrap();
        let vals: Vec<f64> = p.mask.pixels().map(|q| f64::from(p.image.get(q.x, q.y))).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
        assert!((mean - s.background.base_level).abs() < 0.5 * s.background.noise_sigma);
        assert!(sd > 0.5 * s.background.noise_sigma && sd < 1.5 * s.background.noise_sigma, "{sd}");
    }

    #[test]
    fn three_sigma_mass_stands_out() {
        let mut s = spec();
        let sigma = s.background.noise_sigma;
        s.masses.push(MassSpec {
            center: Point::new(70.0, 230.0),
            radius_mm: 6.0,
            contrast: 3.0 * sigma,
            edge_softness_mm: 0.5,
        });
        let p = generate_phantom(&s).unwrap();
        let inside = p.annotations.rasterize(s.width, s.height, Some(LesionKind::Mass));
        let (mut si, mut ni, mut so, mut no) = (0.0, 0.0, 0.0, 0.0);
        for q in p.mask.pixels() {
            let v = f64::from(p.image.get(q.x, q.y));
            if inside[q.y * s.width + q.x] {
                si += v;
                ni += 1.0;
            } else {
                so += v;
                no += 1.0;
            }
        }
        assert!(si / ni - so / no >= 2.0 * sigma, "{}", si / ni - so / no);
    }

    #[test]
    fn annotations_lie_inside_mask() {
        let mut s = spec();
        s.masses.push(MassSpec {
            center: Point::new(50.0, 200.0),
            radius_mm: 4.0,
            contrast: 200.0,
            edge_softness_mm: 0.5,
        });
        s.specks.push(SpeckSpec { center: Pixel::new(40, 300), contrast: 500.0, size: 2 });
        let p = generate_phantom(&s).unwrap();
        assert_eq!(p.annotations.len(), 2);
        for l in &p.annotations.labels {
            for v in &l.boundary {
                assert!(p.mask.contains(v.x.round() as usize, v.y.round() as usize));
            }
        }
    }

    #[test]
    fn lesion_outside_breast_is_rejected() {
        let mut s = spec();
        s.specks.push(SpeckSpec { center: Pixel::new(195, 5), contrast: 100.0, size: 1 });
        assert!(matches!(generate_phantom(&s), Err(Error::LesionOutsideBreast(_))));
        let mut s = spec();
        s.masses.push(MassSpec {
            center: Point::new(2.0, 230.0),
            radius_mm: 5.0,
            contrast: 100.0,
            edge_softness_mm: 1.0,
        });
        assert!(generate_phantom(&s).is_err());
    }
}
