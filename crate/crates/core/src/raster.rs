//! Normalized image rasters, color conversion, and the screen-blend operator.

use std::path::Path;

use thiserror::Error;

/// Smallest supported image side, set by the 8x8 block of the compression emulator.
pub const MIN_DIMENSION: usize = 8;

/// Errors from raster construction, blending, and PNG I/O.
#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions {width}x{height} are below the {MIN_DIMENSION}x{MIN_DIMENSION} minimum")]
    Undersized { width: usize, height: usize },
    #[error("buffer holds {got} samples, expected {expected}")]
    BufferLength { got: usize, expected: usize },
    #[error("sample {index} is {value}, outside [0,1]")]
    SampleRange { index: usize, value: f64 },
    #[error("dimension mismatch: {aw}x{ah} vs {bw}x{bh}")]
    DimensionMismatch { aw: usize, ah: usize, bw: usize, bh: usize },
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// H x W x 3 raster with each channel in [0,1]. Row-major, interleaved RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl NormalizedImage {
    /// Builds an image from interleaved RGB samples, validating range and size.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, RasterError> {
        check_min_dims(width, height)?;
        let expected = width * height * 3;
        if data.len() != expected {
            return Err(RasterError::BufferLength { got: data.len(), expected });
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(RasterError::SampleRange { index, value });
            }
        }
        Ok(Self { width, height, data })
    }

    /// Uniform image with every channel set to `value`.
    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height * 3])
    }

    /// Builds an image by evaluating `f(x, y)` per pixel; results are clamped to [0,1].
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self, RasterError> {
        check_min_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for c in px {
                    data.push(c.clamp(0.0, 1.0));
                }
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, px: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i] = px[0];
        self.data[i + 1] = px[1];
        self.data[i + 2] = px[2];
    }

    /// Replaces the sample buffer wholesale; caller guarantees range and length.
    pub(crate) fn replace_data(&mut self, data: Vec<f64>) {
        debug_assert_eq!(data.len(), self.data.len());
        self.data = data;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// H x W scalar field with values in [0,1]; overlays, luma planes, and rain/fog masks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMask {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarMask {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, RasterError> {
        let expected = width * height;
        if values.len() != expected {
            return Err(RasterError::BufferLength { got: values.len(), expected });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(RasterError::SampleRange { index, value });
            }
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.values[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn check_min_dims(width: usize, height: usize) -> Result<(), RasterError> {
    if width < MIN_DIMENSION || height < MIN_DIMENSION {
        return Err(RasterError::Undersized { width, height });
    }
    Ok(())
}

/// Converts an 8-bit interleaved RGB buffer to a normalized image; each sample becomes v/255.
pub fn normalize(width: usize, height: usize, bytes: &[u8]) -> Result<NormalizedImage, RasterError> {
    check_min_dims(width, height)?;
    let expected = width * height * 3;
    if bytes.len() != expected {
        return Err(RasterError::BufferLength { got: bytes.len(), expected });
    }
    let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(NormalizedImage { width, height, data })
}

/// Converts back to 8-bit samples: round(clamp(v,0,1) * 255).
pub fn denormalize(img: &NormalizedImage) -> Vec<u8> {
    img.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

/// Screen blend: out = 1 - (1 - in) * (1 - alpha * overlay), applied to all three channels.
///
/// Monotone brightening; the output equals the input exactly where alpha * overlay = 0.
pub fn screen_blend(
    base: &NormalizedImage,
    overlay: &ScalarMask,
    alpha: f64,
) -> Result<NormalizedImage, RasterError> {
    assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0,1]");
    if base.width != overlay.width || base.height != overlay.height {
        return Err(RasterError::DimensionMismatch {
            aw: base.width,
            ah: base.height,
            bw: overlay.width,
            bh: overlay.height,
        });
    }
    let mut out = base.clone();
    for (i, v) in out.data.iter_mut().enumerate() {
        let m = overlay.values[i / 3];
        // Expanded form of 1 - (1 - v)(1 - alpha m): exact identity at zero overlay.
        *v = (*v + alpha * m * (1.0 - *v)).min(1.0);
    }
    Ok(out)
}

/// BT.601 luma coefficients.
pub const LUMA_R: f64 = 0.299;
pub const LUMA_G: f64 = 0.587;
pub const LUMA_B: f64 = 0.114;

/// Per-pixel luma plane, 0.299 R + 0.587 G + 0.114 B.
pub fn rgb_to_luma(img: &NormalizedImage) -> ScalarMask {
    let values = img
        .data
        .chunks_exact(3)
        .map(|px| LUMA_R * px[0] + LUMA_G * px[1] + LUMA_B * px[2])
        .collect();
    ScalarMask { width: img.width, height: img.height, values }
}

/// Rescales each pixel's channels so its luma matches `new_luma`, preserving chroma ratios.
///
/// Where the scaled channels would leave [0,1], chroma shrinks toward the gray of equal
/// luma; the target luma itself is always reached.
pub fn luma_replace(img: &NormalizedImage, new_luma: &ScalarMask) -> Result<NormalizedImage, RasterError> {
    if img.width != new_luma.width || img.height != new_luma.height {
        return Err(RasterError::DimensionMismatch {
            aw: img.width,
            ah: img.height,
            bw: new_luma.width,
            bh: new_luma.height,
        });
    }
    let mut out = img.clone();
    for (p, px) in out.data.chunks_exact_mut(3).enumerate() {
        let target = new_luma.values[p].clamp(0.0, 1.0);
        let old = LUMA_R * px[0] + LUMA_G * px[1] + LUMA_B * px[2];
        let scaled = if old > 0.0 {
            let s = target / old;
            [px[0] * s, px[1] * s, px[2] * s]
        } else {
            [target, target, target]
        };
        // Shrink chroma toward equal-luma gray until all channels fit in range.
        let mut k: f64 = 1.0;
        for &c in &scaled {
            if c > 1.0 {
                k = k.min((1.0 - target) / (c - target));
            }
        }
        for (dst, &c) in px.iter_mut().zip(&scaled) {
            *dst = (target + k * (c - target)).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Reads an 8-bit RGB PNG into a normalized image.
pub fn load_png(path: &Path) -> Result<NormalizedImage, RasterError> {
    let img = image::open(path)?.to_rgb8();
    normalize(img.width() as usize, img.height() as usize, img.as_raw())
}

/// Writes a normalized image as an 8-bit RGB PNG.
pub fn save_png(img: &NormalizedImage, path: &Path) -> Result<(), RasterError> {
    let bytes = denormalize(img);
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, bytes)
        .expect("raster buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Bilinear resample of a scalar mask to new dimensions.
pub fn resize_mask(mask: &ScalarMask, width: usize, height: usize) -> ScalarMask {
    if width == mask.width && height == mask.height {
        return mask.clone();
    }
    let mut values = Vec::with_capacity(width * height);
    let sx = mask.width as f64 / width as f64;
    let sy = mask.height as f64 / height as f64;
    for y in 0..height {
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (mask.width - 1) as f64);
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (mask.height - 1) as f64);
            let x0 = fx.floor() as usize;
            let y0 = fy.floor() as usize;
            let x1 = (x0 + 1).min(mask.width - 1);
            let y1 = (y0 + 1).min(mask.height - 1);
            let tx = fx - x0 as f64;
            let ty = fy - y0 as f64;
            let top = mask.get(x0, y0) * (1.0 - tx) + mask.get(x1, y0) * tx;
            let bot = mask.get(x0, y1) * (1.0 - tx) + mask.get(x1, y1) * tx;
            values.push((top * (1.0 - ty) + bot * ty).clamp(0.0, 1.0));
        }
    }
    ScalarMask { width, height, values }
}
