//! Global photometric distortions and masked backlight tone mapping.

pub mod blockdct;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::coco::{AnnotationSet, BitMask, CocoError};
use crate::kernel::{convolve, gaussian_blur, line_kernel, resolution_scale};
use crate::raster::{rgb_to_luma, luma_replace, NormalizedImage, RasterError, ScalarMask};

/// Noise standard deviations per intensity level, fractions of full scale.
pub const NOISE_STD: [f64; 5] = [0.02, 0.04, 0.06, 0.09, 0.13];
/// Contrast stretch factors per level; decrease uses the reciprocal.
pub const CONTRAST_FACTOR: [f64; 5] = [1.25, 1.5, 1.8, 2.2, 2.7];
/// Motion PSF lengths in pixels per level.
pub const MOTION_LENGTH: [usize; 5] = [5, 9, 13, 19, 27];
/// Defocus Gaussian stds in pixels per level, before resolution scaling.
pub const DEFOCUS_STD: [f64; 5] = [1.0, 2.0, 3.5, 5.0, 7.0];
/// Compression qualities per level.
pub const JPEG_QUALITY: [u32; 5] = [50, 35, 25, 15, 8];

#[derive(Debug, Error)]
pub enum PhotometricError {
    #[error("intensity level {0} is outside 1..=5")]
    BadLevel(u8),
    #[error("backlight interval bounds ({0}, {1}) must satisfy 0 < b1 < b2 < 1")]
    BadIntervals(f64, f64),
    #[error("backlight gain {0} is outside [0.5, 2.5]")]
    BadGain(f64),
    #[error("backlight target mask is empty")]
    EmptyTargetMask,
    #[error("no eligible (non-crowd) object for backlight")]
    NoEligibleObject,
    #[error("dimension mismatch: {aw}x{ah} vs {bw}x{bh}")]
    DimensionMismatch { aw: usize, ah: usize, bw: usize, bh: usize },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Mask(#[from] CocoError),
}

/// Distortion strength from 1 (mild) to 5 (severe).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct IntensityLevel(u8);

impl IntensityLevel {
    pub fn new(level: u8) -> Result<Self, PhotometricError> {
        if (1..=5).contains(&level) {
            Ok(Self(level))
        } else {
            Err(PhotometricError::BadLevel(level))
        }
    }

    pub fn get(&self) -> u8 {
        self.0
    }

    /// Zero-based index into the per-level tables.
    pub fn index(&self) -> usize {
        usize::from(self.0) - 1
    }
}

/// Adds i.i.d. zero-mean Gaussian noise per channel, clamped to [0,1].
pub fn gaussian_noise(
    img: &NormalizedImage,
    level: IntensityLevel,
    rng: &mut impl Rng,
) -> NormalizedImage {
    let sigma = NOISE_STD[level.index()];
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    let data = img
        .data()
        .iter()
        .map(|&v| (v + normal.sample(rng)).clamp(0.0, 1.0))
        .collect();
    let mut out = img.clone();
    out.replace_data(data);
    out
}

/// Contrast stretch direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContrastDirection {
    Increase,
    Decrease,
}

/// Linear contrast stretch about mid-gray: v -> 0.5 + c (v - 0.5), clamped.
pub fn adjust_contrast(
    img: &NormalizedImage,
    level: IntensityLevel,
    direction: ContrastDirection,
) -> NormalizedImage {
    let base = CONTRAST_FACTOR[level.index()];
    let c = match direction {
        ContrastDirection::Increase => base,
        ContrastDirection::Decrease => 1.0 / base,
    };
    let data = img.data().iter().map(|&v| (0.5 + c * (v - 0.5)).clamp(0.0, 1.0)).collect();
    let mut out = img.clone();
    out.replace_data(data);
    out
}

/// Emulates lossy block compression in memory: per 8x8 block and channel in
/// luma/chroma space, DCT coefficients are quantized by the standard
/// luminance table scaled to the level's quality. Chroma is not subsampled.
pub fn compression_artifact(img: &NormalizedImage, level: IntensityLevel) -> NormalizedImage {
    let quality = JPEG_QUALITY[level.index()];
    let w = img.width();
    let h = img.height();
    let bw = w.div_ceil(8) * 8;
    let bh = h.div_ceil(8) * 8;

    // Luma/chroma planes in the shifted 255-scale domain, padded by edge
    // replication to block multiples. Chroma is centered on zero so neutral
    // colors quantize exactly.
    let mut planes = [vec![0.0f64; bw * bh], vec![0.0f64; bw * bh], vec![0.0f64; bw * bh]];
    for y in 0..bh {
        for x in 0..bw {
            let px = img.pixel(x.min(w - 1), y.min(h - 1));
            let luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            let cb = (px[2] - luma) / 1.772;
            let cr = (px[0] - luma) / 1.402;
            planes[0][y * bw + x] = luma * 255.0 - 128.0;
            planes[1][y * bw + x] = cb * 255.0;
            planes[2][y * bw + x] = cr * 255.0;
        }
    }

    for plane in planes.iter_mut() {
        for by in (0..bh).step_by(8) {
            for bx in (0..bw).step_by(8) {
                let mut block = [0.0f64; 64];
                for yy in 0..8 {
                    for xx in 0..8 {
                        block[yy * 8 + xx] = plane[(by + yy) * bw + bx + xx];
                    }
                }
                let back = blockdct::quantize_roundtrip_block(&block, quality);
                for yy in 0..8 {
                    for xx in 0..8 {
                        plane[(by + yy) * bw + bx + xx] = back[yy * 8 + xx];
                    }
                }
            }
        }
    }

    let mut out = img.clone();
    let mut data = vec![0.0f64; img.data().len()];
    for y in 0..h {
        for x in 0..w {
            let luma = (planes[0][y * bw + x] + 128.0) / 255.0;
            let cb = planes[1][y * bw + x] / 255.0;
            let cr = planes[2][y * bw + x] / 255.0;
            let r = luma + 1.402 * cr;
            let b = luma + 1.772 * cb;
            let g = (luma - 0.299 * r - 0.114 * b) / 0.587;
            let o = (y * w + x) * 3;
            data[o] = r.clamp(0.0, 1.0);
            data[o + 1] = g.clamp(0.0, 1.0);
            data[o + 2] = b.clamp(0.0, 1.0);
        }
    }
    out.replace_data(data);
    out
}

/// Whole-image motion blur along one direction drawn per image.
pub fn global_motion_blur(
    img: &NormalizedImage,
    level: IntensityLevel,
    angle_deg: f64,
) -> NormalizedImage {
    let length = MOTION_LENGTH[level.index()].min(img.width().min(img.height()));
    let kernel = line_kernel(length, angle_deg);
    convolve(img, &kernel).expect("line kernel fits after length clamp")
}

/// Whole-image Gaussian defocus, std scaled by resolution.
pub fn global_defocus_blur(img: &NormalizedImage, level: IntensityLevel) -> NormalizedImage {
    let s = resolution_scale(img.width(), img.height());
    gaussian_blur(img, DEFOCUS_STD[level.index()] * s).expect("std is positive")
}

/// Masked three-interval tone mapping of the luminance component.
#[derive(Debug, Clone)]
pub struct BacklightSpec {
    pub b1: f64,
    pub b2: f64,
    pub gains: [f64; 3],
    pub target: BitMask,
}

impl BacklightSpec {
    pub fn new(b1: f64, b2: f64, gains: [f64; 3], target: BitMask) -> Result<Self, PhotometricError> {
        if !(0.0 < b1 && b1 < b2 && b2 < 1.0) {
            return Err(PhotometricError::BadIntervals(b1, b2));
        }
        for &g in &gains {
            if !(0.5..=2.5).contains(&g) {
                return Err(PhotometricError::BadGain(g));
            }
        }
        if target.is_empty() {
            return Err(PhotometricError::EmptyTargetMask);
        }
        Ok(Self { b1, b2, gains, target })
    }
}

/// Piecewise-linear tone curve with slopes `gains` on [0,b1), [b1,b2), [b2,1],
/// renormalized so 0 maps to 0 and 1 maps to 1.
pub fn tone_curve(b1: f64, b2: f64, gains: [f64; 3], x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let end = gains[0] * b1 + gains[1] * (b2 - b1) + gains[2] * (1.0 - b2);
    let raw = if x < b1 {
        gains[0] * x
    } else if x < b2 {
        gains[0] * b1 + gains[1] * (x - b1)
    } else {
        gains[0] * b1 + gains[1] * (b2 - b1) + gains[2] * (x - b2)
    };
    raw / end
}

/// Plan-time backlight parameters; the mask is re-derived from the object id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacklightDraw {
    pub object_id: u64,
    pub b1: f64,
    pub b2: f64,
    pub gains: [f64; 3],
}

/// The three preset luma interval pairs.
pub const BACKLIGHT_INTERVALS: [(f64, f64); 3] = [(0.25, 0.6), (0.33, 0.66), (0.3, 0.75)];

/// Draws backlight parameters: the largest non-crowd object is targeted,
/// bounds come from the preset pairs, and gains are redrawn until at least
/// one reaches 1.6 so the effect stays visible.
pub fn sample_backlight_draw(
    ann: &AnnotationSet,
    rng: &mut impl Rng,
) -> Result<BacklightDraw, PhotometricError> {
    let target = ann
        .non_crowd_objects()
        .map(|o| (o.mask.count_ones(), std::cmp::Reverse(o.object_id), o))
        .max_by_key(|(area, rev_id, _)| (*area, *rev_id))
        .map(|(_, _, o)| o)
        .ok_or(PhotometricError::NoEligibleObject)?;
    let (b1, b2) = BACKLIGHT_INTERVALS[rng.random_range(0..BACKLIGHT_INTERVALS.len())];
    let gains = loop {
        let g = [
            rng.random_range(0.5..=2.5),
            rng.random_range(0.5..=2.5),
            rng.random_range(0.5..=2.5),
        ];
        if g.iter().any(|&v| v >= 1.6) {
            break g;
        }
    };
    Ok(BacklightDraw { object_id: target.object_id, b1, b2, gains })
}

/// Draws a full backlight spec with the target mask attached.
pub fn sample_backlight_spec(
    ann: &AnnotationSet,
    rng: &mut impl Rng,
) -> Result<BacklightSpec, PhotometricError> {
    let draw = sample_backlight_draw(ann, rng)?;
    let target = ann
        .objects
        .iter()
        .find(|o| o.object_id == draw.object_id)
        .expect("drawn object comes from this set");
    BacklightSpec::new(draw.b1, draw.b2, draw.gains, target.mask.clone())
}

/// Applies the tone curve to the luminance inside the feathered target mask;
/// chroma is preserved and pixels outside the feather are untouched.
pub fn apply_backlight(
    img: &NormalizedImage,
    spec: &BacklightSpec,
) -> Result<NormalizedImage, PhotometricError> {
    if spec.target.width() != img.width() || spec.target.height() != img.height() {
        return Err(PhotometricError::DimensionMismatch {
            aw: img.width(),
            ah: img.height(),
            bw: spec.target.width(),
            bh: spec.target.height(),
        });
    }
    if spec.target.is_empty() {
        return Err(PhotometricError::EmptyTargetMask);
    }
    let w = img.width();
    let h = img.height();
    let luma = rgb_to_luma(img);
    let mapped_values: Vec<f64> = luma
        .values()
        .iter()
        .map(|&l| tone_curve(spec.b1, spec.b2, spec.gains, l).clamp(0.0, 1.0))
        .collect();
    let mapped = ScalarMask::new(w, h, mapped_values)?;
    let replaced = luma_replace(img, &mapped)?;

    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let mut count = 0u32;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    if spec.target.get(sx, sy) {
                        count += 1;
                    }
                }
            }
            if count == 0 {
                continue;
            }
            let px = if count == 9 {
                replaced.pixel(x, y)
            } else {
                let a = img.pixel(x, y);
                let b = replaced.pixel(x, y);
                let t = f64::from(count);
                [
                    ((9.0 - t) * a[0] + t * b[0]) / 9.0,
                    ((9.0 - t) * a[1] + t * b[1]) / 9.0,
                    ((9.0 - t) * a[2] + t * b[2]) / 9.0,
                ]
            };
            out.set_pixel(x, y, px);
        }
    }
    Ok(out)
}
