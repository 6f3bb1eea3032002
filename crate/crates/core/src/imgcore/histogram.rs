use super::{BreastMask, GrayImage, Pixel};

/// 256-bin histogram over 8-bit gray levels, holding either raw counts or
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram256 {
    bins: [f64; 256],
    normalized: bool,
}

impl Default for Histogram256 {
    fn default() -> Self {
        Self {
            bins: [0.0; 256],
            normalized: false,
        }
    }
}

impl Histogram256 {
    pub fn from_counts(counts: &[u32; 256]) -> Self {
        let mut bins = [0.0; 256];
        for (b, &c) in bins.iter_mut().zip(counts) {
            *b = f64::from(c);
        }
        Self {
            bins,
            normalized: false,
        }
    }

    /// Wraps probabilities that already sum to one.
    pub fn from_probabilities(bins: [f64; 256]) -> Self {
        Self {
            bins,
            normalized: true,
        }
    }

    pub fn bins(&self) -> &[f64; 256] {
        &self.bins
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn increment(&mut self, level: u8) {
        debug_assert!(!self.normalized);
        self.bins[level as usize] += 1.0;
    }

    /// Probability version of this histogram. An empty histogram stays zero.
    pub fn normalized(&self) -> Self {
        if self.normalized {
            return self.clone();
        }
        let total = self.total();
        let mut bins = self.bins;
        if total > 0.0 {
            for b in &mut bins {
                *b /= total;
            }
        }
        Self {
            bins,
            normalized: true,
        }
    }

    /// Inclusive prefix sums of the normalized histogram. The last entry is
    /// pinned to exactly 1 so a generalized inverse always has a solution.
    pub fn cdf(&self) -> [f64; 256] {
        let p = self.normalized();
        let mut cdf = [0.0; 256];
        let mut acc = 0.0;
        for (c, &b) in cdf.iter_mut().zip(p.bins.iter()) {
            acc += b;
            *c = acc;
        }
        if acc > 0.0 {
            cdf[255] = 1.0;
        }
        cdf
    }
}

/// Gray-level histogram (256 bins) of the `w`-by-`w` window centered at
/// `center`. The window is clipped at the image border and only counts
/// pixels inside `mask`.
pub fn window_histogram(img: &GrayImage, mask: &BreastMask, center: Pixel, w: usize) -> Histogram256 {
    let r = (w / 2) as isize;
    let (cx, cy) = (center.x as isize, center.y as isize);
    let x0 = (cx - r).max(0) as usize;
    let x1 = ((cx + r) as usize).min(img.width() - 1);
    let y0 = (cy - r).max(0) as usize;
    let y1 = ((cy + r) as usize).min(img.height() - 1);
    let mut counts = [0u32; 256];
    for y in y0..=y1 {
        for x in x0..=x1 {
            if mask.contains(x, y) {
                counts[img.level8(x, y) as usize] += 1;
            }
        }
    }
    Histogram256::from_counts(&counts)
}
