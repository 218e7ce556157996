//! Gradient fields and dominant-orientation extraction from image patches.
//!
//! Gradients use central differences on the luminance grid; orientations are
//! accumulated into a 36-bin histogram with Gaussian spatial weighting, and
//! peaks are refined by 3-point parabolic interpolation. The border row and
//! column of a patch have no central difference, so they are excluded from
//! the valid region rather than padded.

use crate::error::{Error, Result};

/// Number of 10-degree orientation bins.
pub const HISTOGRAM_BINS: usize = 36;

/// Secondary peaks at or above this fraction of the global peak are reported.
pub const SECONDARY_PEAK_RATIO: f64 = 0.8;

/// A row-major grid of luminance values.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePatch {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::InvalidPatch {
                reason: format!("dimensions {width}x{height} below the 3x3 minimum"),
            });
        }
        if data.len() != width * height {
            return Err(Error::InvalidPatch {
                reason: format!(
                    "data length {} does not match {width}x{height}",
                    data.len()
                ),
            });
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPatch {
                reason: format!("non-finite luminance value {bad}"),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Build a patch from `f(x, y)` evaluated over the grid.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Parse the plain-text grid format: a `width height` line followed by
    /// `height` rows of `width` space-separated luminance values.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (header_line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty patch file".into(),
        })?;
        let mut parts = header.split_whitespace();
        let parse_dim = |tok: Option<&str>, what: &str| -> Result<usize> {
            tok.ok_or(Error::Parse {
                line: header_line + 1,
                message: format!("missing {what}"),
            })?
            .parse()
            .map_err(|e| Error::Parse {
                line: header_line + 1,
                message: format!("bad {what}: {e}"),
            })
        };
        let width = parse_dim(parts.next(), "width")?;
        let height = parse_dim(parts.next(), "height")?;

        let mut data = Vec::with_capacity(width * height);
        let mut rows = 0usize;
        for (lineno, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad luminance value {tok:?}: {e}"),
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != width {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {width} values, got {}", row.len()),
                });
            }
            data.extend(row);
            rows += 1;
        }
        if rows != height {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected {height} rows, got {rows}"),
            });
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Same patch with every value mapped through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImagePatch {
        ImagePatch {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-pixel gradient magnitude and direction. Valid on the interior only.
#[derive(Debug, Clone)]
pub struct GradientField {
    width: usize,
    height: usize,
    magnitude: Vec<f64>,
    direction: Vec<f64>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// The 1-pixel border carries no central difference and is invalid.
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        x >= 1 && x + 1 < self.width && y >= 1 && y + 1 < self.height
    }

    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        self.magnitude[y * self.width + x]
    }

    pub fn direction(&self, x: usize, y: usize) -> f64 {
        self.direction[y * self.width + x]
    }
}

/// Central-difference gradient of a patch: `m = sqrt(dx^2 + dy^2)`,
/// `theta = atan2(dy, dx)` with `dx = L(x+1,y) - L(x-1,y)` and
/// `dy = L(x,y+1) - L(x,y-1)`.
pub fn gradient(patch: &ImagePatch) -> GradientField {
    let (w, h) = (patch.width, patch.height);
    let mut magnitude = vec![0.0; w * h];
    let mut direction = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let dx = patch.get(x + 1, y) - patch.get(x - 1, y);
            let dy = patch.get(x, y + 1) - patch.get(x, y - 1);
            let idx = y * w + x;
            magnitude[idx] = (dx * dx + dy * dy).sqrt();
            let mut theta = dy.atan2(dx);
            if theta <= -std::f64::consts::PI {
                theta = std::f64::consts::PI;
            }
            direction[idx] = theta;
        }
    }
    GradientField {
        width: w,
        height: h,
        magnitude,
        direction,
    }
}

/// 36-bin orientation histogram; bin `i` covers `[10i, 10(i+1))` degrees
/// after shifting directions to `[0, 360)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationHistogram {
    pub bins: [f64; HISTOGRAM_BINS],
}

impl OrientationHistogram {
    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }
}

/// Accumulate gradient orientations in the window `center +- radius`.
///
/// Each valid pixel votes its direction bin with weight
/// `m * exp(-d^2 / (2 sigma^2))`, the vote split linearly between the two
/// nearest bin centers.
pub fn orientation_histogram(
    field: &GradientField,
    center: (usize, usize),
    radius: usize,
    sigma: f64,
) -> Result<OrientationHistogram> {
    if sigma <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("{sigma} is not positive"),
        });
    }
    let (cx, cy) = (center.0 as i64, center.1 as i64);
    let r = radius as i64;
    let mut bins = [0.0; HISTOGRAM_BINS];
    let mut any = false;
    for y in (cy - r).max(0)..=(cy + r).min(field.height as i64 - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(field.width as i64 - 1) {
            let (ux, uy) = (x as usize, y as usize);
            if !field.is_valid(ux, uy) {
                continue;
            }
            any = true;
            let d2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) as f64;
            let weight = field.magnitude(ux, uy) * (-d2 / (2.0 * sigma * sigma)).exp();
            vote(&mut bins, field.direction(ux, uy), weight);
        }
    }
    if !any {
        return Err(Error::EmptyWindow);
    }
    Ok(OrientationHistogram { bins })
}

/// Split one weighted vote between the two bins nearest to `theta`.
fn vote(bins: &mut [f64; HISTOGRAM_BINS], theta: f64, weight: f64) {
    let mut deg = theta.to_degrees();
    if deg < 0.0 {
        deg += 360.0;
    }
    let pos = deg / 10.0 - 0.5;
    let lo = pos.floor();
    let frac = pos - lo;
    let lo_bin = (lo as i64).rem_euclid(HISTOGRAM_BINS as i64) as usize;
    let hi_bin = (lo_bin + 1) % HISTOGRAM_BINS;
    bins[lo_bin] += weight * (1.0 - frac);
    bins[hi_bin] += weight * frac;
}

/// Dominant orientations of a histogram, in radians in `(-pi, pi]`.
///
/// Returns the global peak plus every local peak at or above 80% of it, each
/// refined by fitting a parabola through the peak bin and its neighbors.
/// Ordered by descending peak weight, ties by ascending angle.
pub fn dominant_orientation(hist: &OrientationHistogram) -> Result<Vec<f64>> {
    let bins = &hist.bins;
    let max = bins.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::ZeroHistogram);
    }
    let threshold = SECONDARY_PEAK_RATIO * max;
    let mut peaks: Vec<(f64, f64)> = Vec::new(); // (weight, angle)
    for i in 0..HISTOGRAM_BINS {
        let prev = bins[(i + HISTOGRAM_BINS - 1) % HISTOGRAM_BINS];
        let next = bins[(i + 1) % HISTOGRAM_BINS];
        let is_local_peak = bins[i] > prev && bins[i] > next;
        // A global maximum always counts, even on a plateau.
        if !(is_local_peak && bins[i] >= threshold) && bins[i] < max {
            continue;
        }
        let denom = prev - 2.0 * bins[i] + next;
        let offset = if denom.abs() < 1e-12 {
            0.0
        } else {
            (0.5 * (prev - next) / denom).clamp(-0.5, 0.5)
        };
        let deg = (i as f64 + 0.5 + offset) * 10.0;
        peaks.push((bins[i], crate::ekf::wrap_angle(deg.to_radians())));
    }
    peaks.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
    });
    Ok(peaks.into_iter().map(|(_, angle)| angle).collect())
}
