//! Convolution kernels and border-replicated convolution.

use thiserror::Error;

use crate::raster::NormalizedImage;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel dimensions {width}x{height} must be odd")]
    EvenDimension { width: usize, height: usize },
    #[error("kernel weight {index} is {value}; weights must be finite and non-negative")]
    BadWeight { index: usize, value: f64 },
    #[error("kernel weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("kernel {kw}x{kh} does not fit image {iw}x{ih}")]
    KernelTooLarge { kw: usize, kh: usize, iw: usize, ih: usize },
    #[error("gaussian std must be positive, got {0}")]
    NonPositiveStd(f64),
}

/// Odd-sized 2-D convolution kernel with non-negative weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    /// Validates oddness, non-negativity, and normalization (sum = 1 within 1e-9).
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self, KernelError> {
        if width % 2 == 0 || height % 2 == 0 || width == 0 || height == 0 {
            return Err(KernelError::EvenDimension { width, height });
        }
        assert_eq!(weights.len(), width * height, "weight buffer matches dimensions");
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(KernelError::BadWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(KernelError::NotNormalized { sum });
        }
        Ok(Self { width, height, weights })
    }

    /// Normalizes raw non-negative weights to sum 1.
    pub fn from_unnormalized(width: usize, height: usize, raw: Vec<f64>) -> Result<Self, KernelError> {
        let sum: f64 = raw.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(KernelError::NotNormalized { sum });
        }
        let weights = raw.into_iter().map(|w| w / sum).collect();
        Self::new(width, height, weights)
    }

    /// The 1x1 kernel that leaves an image unchanged.
    pub fn identity() -> Self {
        Self { width: 1, height: 1, weights: vec![1.0] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radius_x(&self) -> usize {
        self.width / 2
    }

    pub fn radius_y(&self) -> usize {
        self.height / 2
    }

    /// Non-zero taps as (dx, dy, weight) offsets from the kernel center.
    pub fn taps(&self) -> Vec<(i64, i64, f64)> {
        let rx = self.radius_x() as i64;
        let ry = self.radius_y() as i64;
        let mut taps = Vec::new();
        for ky in 0..self.height {
            for kx in 0..self.width {
                let w = self.weights[ky * self.width + kx];
                if w > 0.0 {
                    taps.push((kx as i64 - rx, ky as i64 - ry, w));
                }
            }
        }
        taps
    }
}

/// Uniform line-segment PSF of the given pixel length through the kernel center.
///
/// The segment is undirected: angles 180 degrees apart yield the same kernel.
/// Length 1 collapses to the identity kernel.
pub fn line_kernel(length: usize, angle_deg: f64) -> Kernel2D {
    assert!(length >= 1, "line kernel length must be at least 1");
    if length == 1 {
        return Kernel2D::identity();
    }
    let theta = angle_deg.to_radians();
    let (dy, dx) = theta.sin_cos();
    let half = (length as f64 - 1.0) / 2.0;
    let mut taps: Vec<(i64, i64)> = Vec::with_capacity(length);
    let mut rx = 0i64;
    let mut ry = 0i64;
    for i in 0..length {
        let t = i as f64 - half;
        let x = (t * dx).round() as i64;
        let y = (t * dy).round() as i64;
        rx = rx.max(x.abs());
        ry = ry.max(y.abs());
        taps.push((x, y));
    }
    let width = (2 * rx + 1) as usize;
    let height = (2 * ry + 1) as usize;
    let mut raw = vec![0.0; width * height];
    for (x, y) in taps {
        raw[(y + ry) as usize * width + (x + rx) as usize] += 1.0;
    }
    Kernel2D::from_unnormalized(width, height, raw).expect("line taps are non-negative")
}

/// Isotropic Gaussian kernel truncated at radius ceil(3 * std), renormalized.
pub fn gaussian_kernel(std: f64) -> Result<Kernel2D, KernelError> {
    if !std.is_finite() || std <= 0.0 {
        return Err(KernelError::NonPositiveStd(std));
    }
    let radius = (3.0 * std).ceil() as i64;
    let size = (2 * radius + 1) as usize;
    let inv = 1.0 / (2.0 * std * std);
    let mut raw = Vec::with_capacity(size * size);
    for y in -radius..=radius {
        for x in -radius..=radius {
            raw.push((-((x * x + y * y) as f64) * inv).exp());
        }
    }
    Kernel2D::from_unnormalized(size, size, raw)
}

/// 1-D Gaussian taps for separable evaluation, truncated and normalized like [`gaussian_kernel`].
fn gaussian_taps_1d(std: f64) -> Vec<f64> {
    let radius = (3.0 * std).ceil() as i64;
    let inv = 1.0 / (2.0 * std * std);
    let mut taps: Vec<f64> = (-radius..=radius).map(|k| (-((k * k) as f64) * inv).exp()).collect();
    let sum: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= sum;
    }
    taps
}

/// Blur scale factor tying kernel sizes to image resolution: max(1, min(W,H)/512).
pub fn resolution_scale(width: usize, height: usize) -> f64 {
    (width.min(height) as f64 / 512.0).max(1.0)
}

/// Dense convolution with edge replication; output clamped to [0,1].
pub fn convolve(img: &NormalizedImage, kernel: &Kernel2D) -> Result<NormalizedImage, KernelError> {
    if kernel.width > img.width() || kernel.height > img.height() {
        return Err(KernelError::KernelTooLarge {
            kw: kernel.width,
            kh: kernel.height,
            iw: img.width(),
            ih: img.height(),
        });
    }
    let taps = kernel.taps();
    let mut out = img.clone();
    let mut data = vec![0.0; img.data().len()];
    for y in 0..img.height() {
        for x in 0..img.width() {
            let px = convolve_at(img, &taps, x, y);
            let i = (y * img.width() + x) * 3;
            data[i] = px[0];
            data[i + 1] = px[1];
            data[i + 2] = px[2];
        }
    }
    out.replace_data(data);
    Ok(out)
}

/// Single-pixel convolution with edge replication, clamped to [0,1].
pub(crate) fn convolve_at(img: &NormalizedImage, taps: &[(i64, i64, f64)], x: usize, y: usize) -> [f64; 3] {
    let w = img.width() as i64;
    let h = img.height() as i64;
    let data = img.data();
    let mut acc = [0.0f64; 3];
    for &(dx, dy, wt) in taps {
        let sx = (x as i64 + dx).clamp(0, w - 1) as usize;
        let sy = (y as i64 + dy).clamp(0, h - 1) as usize;
        let i = (sy * img.width() + sx) * 3;
        acc[0] += wt * data[i];
        acc[1] += wt * data[i + 1];
        acc[2] += wt * data[i + 2];
    }
    [acc[0].clamp(0.0, 1.0), acc[1].clamp(0.0, 1.0), acc[2].clamp(0.0, 1.0)]
}

/// Separable Gaussian blur, equivalent to convolving with [`gaussian_kernel`].
pub fn gaussian_blur(img: &NormalizedImage, std: f64) -> Result<NormalizedImage, KernelError> {
    if !std.is_finite() || std <= 0.0 {
        return Err(KernelError::NonPositiveStd(std));
    }
    let taps = gaussian_taps_1d(std);
    let radius = (taps.len() / 2) as i64;
    let w = img.width();
    let h = img.height();
    let src = img.data();

    // Horizontal pass.
    let mut mid = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (k, &wt) in taps.iter().enumerate() {
                let sx = (x as i64 + k as i64 - radius).clamp(0, w as i64 - 1) as usize;
                let i = (y * w + sx) * 3;
                acc[0] += wt * src[i];
                acc[1] += wt * src[i + 1];
                acc[2] += wt * src[i + 2];
            }
            let o = (y * w + x) * 3;
            mid[o] = acc[0];
            mid[o + 1] = acc[1];
            mid[o + 2] = acc[2];
        }
    }

    // Vertical pass.
    let mut data = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (k, &wt) in taps.iter().enumerate() {
                let sy = (y as i64 + k as i64 - radius).clamp(0, h as i64 - 1) as usize;
                let i = (sy * w + x) * 3;
                acc[0] += wt * mid[i];
                acc[1] += wt * mid[i + 1];
                acc[2] += wt * mid[i + 2];
            }
            let o = (y * w + x) * 3;
            data[o] = acc[0].clamp(0.0, 1.0);
            data[o + 1] = acc[1].clamp(0.0, 1.0);
            data[o + 2] = acc[2].clamp(0.0, 1.0);
        }
    }
    let mut out = img.clone();
    out.replace_data(data);
    Ok(out)
}
