//! Binary pixel masks and their geometry: moments, orientation, overlap, dilation.

use super::CocoError;

/// Per-pixel binary mask with the parent image's dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, CocoError> {
        if bits.len() != width * height {
            return Err(CocoError::FieldLength { got: bits.len(), expected: width * height });
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// In-place union with another mask of the same dimensions.
    pub fn or_assign(&mut self, other: &BitMask) -> Result<(), CocoError> {
        if self.width != other.width || self.height != other.height {
            return Err(CocoError::FieldLength {
                got: other.bits.len(),
                expected: self.bits.len(),
            });
        }
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    /// Dilation by a square structuring element of the given radius (Chebyshev ball).
    pub fn dilate(&self, radius: usize) -> BitMask {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i64;
        let mut out = BitMask::empty(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                let y0 = (y as i64 - r).max(0) as usize;
                let y1 = ((y as i64 + r) as usize).min(self.height - 1);
                let x0 = (x as i64 - r).max(0) as usize;
                let x1 = ((x as i64 + r) as usize).min(self.width - 1);
                for yy in y0..=y1 {
                    for xx in x0..=x1 {
                        out.set(xx, yy, true);
                    }
                }
            }
        }
        out
    }

    /// Inclusive bounding box (x0, y0, x1, y1) of the set bits, or None when empty.
    pub fn bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let mut found = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let (x0, y0, x1, y1) = found.unwrap_or((x, y, x, y));
                    found = Some((x0.min(x), y0.min(y), x1.max(x), y1.max(y)));
                }
            }
        }
        found
    }

    /// Arithmetic mean of a row-major scalar field over the set bits.
    pub fn mean_over(&self, field: &[f64]) -> Result<f64, CocoError> {
        if field.len() != self.bits.len() {
            return Err(CocoError::FieldLength { got: field.len(), expected: self.bits.len() });
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for (&b, &v) in self.bits.iter().zip(field) {
            if b {
                sum += v;
                n += 1;
            }
        }
        if n == 0 {
            return Err(CocoError::EmptyMaskGeometry);
        }
        Ok(sum / n as f64)
    }

    /// Major-axis orientation in degrees within [0, 180), from central second moments.
    ///
    /// Isotropic masks (mu11 = 0 and mu20 = mu02) return 0 by convention, so motion
    /// blur on circular objects defaults to horizontal.
    pub fn orientation_degrees(&self) -> Result<f64, CocoError> {
        let n = self.count_ones();
        if n == 0 {
            return Err(CocoError::EmptyMaskGeometry);
        }
        let inv = 1.0 / n as f64;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    cx += x as f64;
                    cy += y as f64;
                }
            }
        }
        cx *= inv;
        cy *= inv;
        let mut mu11 = 0.0;
        let mut mu20 = 0.0;
        let mut mu02 = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let dx = x as f64 - cx;
                    let dy = y as f64 - cy;
                    mu11 += dx * dy;
                    mu20 += dx * dx;
                    mu02 += dy * dy;
                }
            }
        }
        if mu11 == 0.0 && (mu20 - mu02).abs() < 1e-12 {
            return Ok(0.0);
        }
        let mut theta = 0.5 * (2.0 * mu11).atan2(mu20 - mu02).to_degrees();
        if theta < 0.0 {
            theta += 180.0;
        }
        if theta >= 180.0 {
            theta -= 180.0;
        }
        Ok(theta)
    }
}

/// Axis-aligned box (x, y, w, h) in pixels, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Clamps the box to an image raster, shrinking overhanging extents.
    pub fn clamp_to(&self, width: usize, height: usize) -> BBox {
        let x0 = self.x.clamp(0.0, width as f64);
        let y0 = self.y.clamp(0.0, height as f64);
        let x1 = (self.x + self.w).clamp(0.0, width as f64);
        let y1 = (self.y + self.h).clamp(0.0, height as f64);
        BBox { x: x0, y: y0, w: (x1 - x0).max(0.0), h: (y1 - y0).max(0.0) }
    }

    /// Intersection area over union area.
    pub fn iou(&self, other: &BBox) -> f64 {
        let ix0 = self.x.max(other.x);
        let iy0 = self.y.max(other.y);
        let ix1 = (self.x + self.w).min(other.x + other.w);
        let iy1 = (self.y + self.h).min(other.y + other.h);
        let inter = (ix1 - ix0).max(0.0) * (iy1 - iy0).max(0.0);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        inter / union
    }
}

/// Free-function form of [`BBox::iou`].
pub fn bbox_iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// Free-function form of [`BitMask::mean_over`].
pub fn mask_mean_over(mask: &BitMask, field: &[f64]) -> Result<f64, CocoError> {
    mask.mean_over(field)
}

/// Free-function form of [`BitMask::orientation_degrees`].
pub fn mask_orientation(mask: &BitMask) -> Result<f64, CocoError> {
    mask.orientation_degrees()
}
