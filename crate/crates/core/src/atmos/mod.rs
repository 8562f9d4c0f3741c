//! Depth-aware atmospheric distortions: layered rain and depth-proportional fog.

mod noise;

pub use noise::fractal_value_noise;

use rand::Rng;
use rand::RngCore;
use thiserror::Error;

use crate::depth::{FarnessMap, Stratum, StrataMap};
use crate::raster::{screen_blend, NormalizedImage, RasterError, ScalarMask};

/// Rain blend strength is drawn from this interval, one draw per image.
pub const RAIN_ALPHA_RANGE: (f64, f64) = (0.6, 1.0);
/// Fog blend strength is fixed.
pub const FOG_ALPHA: f64 = 0.95;
/// Streak length bounds in pixels.
pub const STREAK_LENGTH_RANGE: (f64, f64) = (20.0, 60.0);
/// Streak direction jitter around the shared angle, degrees.
pub const STREAK_ANGLE_JITTER: f64 = 4.0;

#[derive(Debug, Error)]
pub enum AtmosError {
    #[error("dimension mismatch: {aw}x{ah} vs {bw}x{bh}")]
    DimensionMismatch { aw: usize, ah: usize, bw: usize, bh: usize },
    #[error("rain alpha {0} is outside [0.6, 1.0]")]
    BadRainAlpha(f64),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Blend constant for an atmospheric overlay; rain draws it, fog fixes it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendAlpha(f64);

impl BlendAlpha {
    /// Rain alpha, validated against [`RAIN_ALPHA_RANGE`].
    pub fn rain(value: f64) -> Result<Self, AtmosError> {
        if !value.is_finite() || value < RAIN_ALPHA_RANGE.0 || value > RAIN_ALPHA_RANGE.1 {
            return Err(AtmosError::BadRainAlpha(value));
        }
        Ok(Self(value))
    }

    /// The fixed fog alpha.
    pub fn fog() -> Self {
        Self(FOG_ALPHA)
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// The three rain density layers; coarse composites onto the foreground,
/// mid onto the middleground, fine onto the background.
#[derive(Debug, Clone)]
pub struct RainSubmasks {
    pub fine: ScalarMask,
    pub mid: ScalarMask,
    pub coarse: ScalarMask,
}

/// Procedural fog density field.
#[derive(Debug, Clone)]
pub struct FogMask {
    pub values: ScalarMask,
}

/// Renders anti-aliased rain streaks onto a black mask.
///
/// Streaks are 20-60 px long, 1-2 px wide, individually weighted in [0.4, 1],
/// and all within 4 degrees of the shared angle. Overlaps keep the brighter
/// streak, so values stay in [0,1]. Deterministic per rng state.
pub fn synthesize_rain_base(
    rng: &mut impl Rng,
    width: usize,
    height: usize,
    streak_count: usize,
    angle_deg: f64,
) -> ScalarMask {
    assert!(streak_count >= 1, "need at least one streak");
    let mut mask = ScalarMask::zeros(width, height);
    let margin = STREAK_LENGTH_RANGE.1 / 2.0 + 2.0;
    for _ in 0..streak_count {
        let cx = rng.random_range(-margin..width as f64 + margin);
        let cy = rng.random_range(-margin..height as f64 + margin);
        let length = rng.random_range(STREAK_LENGTH_RANGE.0..=STREAK_LENGTH_RANGE.1);
        let stroke = rng.random_range(1.0..=2.0f64);
        let intensity = rng.random_range(0.4..=1.0f64);
        let jitter = rng.random_range(-STREAK_ANGLE_JITTER..=STREAK_ANGLE_JITTER);
        let theta = (angle_deg + jitter).to_radians();
        let (dy, dx) = theta.sin_cos();
        // Capsule of total extent `length`: segment shortened by the cap radius.
        let half = (length - stroke).max(0.0) / 2.0;
        let (ax, ay) = (cx - dx * half, cy - dy * half);
        let (bx, by) = (cx + dx * half, cy + dy * half);

        let x0 = ((ax.min(bx) - 2.0).floor().max(0.0)) as usize;
        let x1 = ((ax.max(bx) + 2.0).ceil().min(width as f64 - 1.0)).max(0.0) as usize;
        let y0 = ((ay.min(by) - 2.0).floor().max(0.0)) as usize;
        let y1 = ((ay.max(by) + 2.0).ceil().min(height as f64 - 1.0)).max(0.0) as usize;
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0..=y1 {
            for x in x0..=x1 {
                let px = x as f64 + 0.5;
                let py = y as f64 + 0.5;
                let d = segment_distance(px, py, ax, ay, bx, by);
                // Coverage falls linearly across the last half-pixel of the
                // stroke radius; zero outside it, so a streak's support stays
                // within `stroke` pixels of the axis.
                let coverage = ((stroke / 2.0 - d) / 0.5).clamp(0.0, 1.0);
                if coverage > 0.0 {
                    let v = intensity * coverage;
                    if v > mask.get(x, y) {
                        mask.set(x, y, v);
                    }
                }
            }
        }
    }
    mask
}

fn segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let vx = bx - ax;
    let vy = by - ay;
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 { (((px - ax) * vx + (py - ay) * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let qx = ax + t * vx;
    let qy = ay + t * vy;
    ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
}

/// Grayscale 3x3 dilation (max filter), edges replicated.
fn dilate3(mask: &ScalarMask) -> ScalarMask {
    morph3(mask, f64::max, 0.0)
}

/// Grayscale 3x3 erosion (min filter), edges replicated.
fn erode3(mask: &ScalarMask) -> ScalarMask {
    morph3(mask, f64::min, 1.0)
}

fn morph3(mask: &ScalarMask, op: fn(f64, f64) -> f64, init: f64) -> ScalarMask {
    let w = mask.width();
    let h = mask.height();
    let mut out = ScalarMask::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = init;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    acc = op(acc, mask.get(sx, sy));
                }
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Splits a base rain mask into three density layers by morphology:
/// coarse = dilated, mid = base, fine = eroded at half intensity.
pub fn derive_rain_submasks(base: &ScalarMask) -> RainSubmasks {
    let coarse = dilate3(base);
    let eroded = erode3(base);
    let mut fine = ScalarMask::zeros(base.width(), base.height());
    for y in 0..base.height() {
        for x in 0..base.width() {
            fine.set(x, y, eroded.get(x, y) * 0.5);
        }
    }
    RainSubmasks { fine, mid: base.clone(), coarse }
}

/// Zeroes a sub-mask outside its stratum.
fn gate_to_stratum(sub: &ScalarMask, strata: &StrataMap, stratum: Stratum) -> ScalarMask {
    let mut out = ScalarMask::zeros(sub.width(), sub.height());
    for y in 0..sub.height() {
        for x in 0..sub.width() {
            if strata.label(x, y) == stratum {
                out.set(x, y, sub.get(x, y));
            }
        }
    }
    out
}

/// Composites the three rain layers cumulatively, foreground to background,
/// each screen-blended only over its own stratum.
pub fn apply_rain(
    img: &NormalizedImage,
    strata: &StrataMap,
    subs: &RainSubmasks,
    alpha: BlendAlpha,
) -> Result<NormalizedImage, AtmosError> {
    for sub in [&subs.fine, &subs.mid, &subs.coarse] {
        if sub.width() != img.width() || sub.height() != img.height() {
            return Err(AtmosError::DimensionMismatch {
                aw: img.width(),
                ah: img.height(),
                bw: sub.width(),
                bh: sub.height(),
            });
        }
    }
    if strata.width() != img.width() || strata.height() != img.height() {
        return Err(AtmosError::DimensionMismatch {
            aw: img.width(),
            ah: img.height(),
            bw: strata.width(),
            bh: strata.height(),
        });
    }
    let fore = gate_to_stratum(&subs.coarse, strata, Stratum::Foreground);
    let mid = gate_to_stratum(&subs.mid, strata, Stratum::Middleground);
    let back = gate_to_stratum(&subs.fine, strata, Stratum::Background);
    let a = alpha.value();
    let step1 = screen_blend(img, &fore, a)?;
    let step2 = screen_blend(&step1, &mid, a)?;
    Ok(screen_blend(&step2, &back, a)?)
}

/// Synthesizes a smooth fog density field: 4-octave value noise at base cell
/// 64 px and persistence 0.5, normalized into [0.3, 1.0].
pub fn synthesize_fog_mask(rng: &mut impl RngCore, width: usize, height: usize) -> FogMask {
    let seed = rng.next_u64();
    let raw = fractal_value_noise(seed, width, height, 4, 64.0, 0.5);
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = if max - min < 1e-12 {
        vec![0.65; raw.len()]
    } else {
        let scale = (1.0 - 0.3) / (max - min);
        raw.into_iter().map(|v| 0.3 + (v - min) * scale).collect()
    };
    FogMask { values: ScalarMask::new(width, height, values).expect("normalized into [0.3,1]") }
}

/// Depth-proportional fog: out = 1 - (1 - in)(1 - kappa H) with kappa = 0.95 farness.
pub fn apply_fog(
    img: &NormalizedImage,
    depth: &FarnessMap,
    fog: &FogMask,
) -> Result<NormalizedImage, AtmosError> {
    if depth.width() != img.width() || depth.height() != img.height() {
        return Err(AtmosError::DimensionMismatch {
            aw: img.width(),
            ah: img.height(),
            bw: depth.width(),
            bh: depth.height(),
        });
    }
    if fog.values.width() != img.width() || fog.values.height() != img.height() {
        return Err(AtmosError::DimensionMismatch {
            aw: img.width(),
            ah: img.height(),
            bw: fog.values.width(),
            bh: fog.values.height(),
        });
    }
    let mut out = img.clone();
    let mut data = Vec::with_capacity(img.data().len());
    for (i, &v) in img.data().iter().enumerate() {
        let p = i / 3;
        let kappa = FOG_ALPHA * depth.values()[p];
        let h = fog.values.values()[p];
        // Expanded form of 1 - (1 - v)(1 - kappa h): exact identity where kappa h = 0.
        data.push((v + kappa * h * (1.0 - v)).min(1.0));
    }
    out.replace_data(data);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::FocusThreshold;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_strata(width: usize, height: usize, stratum: Stratum) -> StrataMap {
        StrataMap::from_parts(
            width,
            height,
            vec![stratum; width * height],
            0.5,
            0.5,
            0.5,
            FocusThreshold::new(0.5).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn rain_base_is_deterministic() {
        let a = synthesize_rain_base(&mut ChaCha8Rng::seed_from_u64(5), 64, 64, 40, 90.0);
        let b = synthesize_rain_base(&mut ChaCha8Rng::seed_from_u64(5), 64, 64, 40, 90.0);
        assert_eq!(a, b);
    }

    #[test]
    fn rain_base_values_in_range() {
        let m = synthesize_rain_base(&mut ChaCha8Rng::seed_from_u64(2), 80, 60, 100, 80.0);
        assert!(m.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(m.values().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn single_streak_support_bound() {
        // Support of one streak stays within 2 * max length pixels.
        for seed in 0..24 {
            let m = synthesize_rain_base(&mut ChaCha8Rng::seed_from_u64(seed), 128, 128, 1, 90.0);
            let support = m.values().iter().filter(|&&v| v > 0.0).count();
            assert!(support <= 120, "seed {seed}: support {support}");
        }
    }

    #[test]
    fn submasks_of_empty_base_are_empty() {
        let base = ScalarMask::zeros(16, 16);
        let subs = derive_rain_submasks(&base);
        assert!(subs.fine.values().iter().all(|&v| v == 0.0));
        assert!(subs.mid.values().iter().all(|&v| v == 0.0));
        assert!(subs.coarse.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn submasks_of_one_pixel_streak() {
        // A 1-px vertical line: erosion kills it, dilation widens it to 3 px.
        let mut base = ScalarMask::zeros(16, 16);
        for y in 2..14 {
            base.set(8, y, 1.0);
        }
        let subs = derive_rain_submasks(&base);
        assert!(subs.fine.values().iter().all(|&v| v == 0.0));
        assert_eq!(subs.coarse.get(7, 8), 1.0);
        assert_eq!(subs.coarse.get(9, 8), 1.0);
        assert_eq!(subs.coarse.get(6, 8), 0.0);
    }

    #[test]
    fn submasks_of_full_ones() {
        let base = ScalarMask::constant(8, 8, 1.0).unwrap();
        let subs = derive_rain_submasks(&base);
        assert!(subs.coarse.values().iter().all(|&v| v == 1.0));
        assert!(subs.fine.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn submask_coverage_ordering() {
        let base = synthesize_rain_base(&mut ChaCha8Rng::seed_from_u64(9), 96, 96, 60, 85.0);
        let subs = derive_rain_submasks(&base);
        assert!(subs.fine.mean() < subs.mid.mean());
        assert!(subs.mid.mean() < subs.coarse.mean());
    }

    #[test]
    fn rain_zero_submasks_is_identity() {
        let img = NormalizedImage::constant(16, 16, 0.42).unwrap();
        let zero = ScalarMask::zeros(16, 16);
        let subs = RainSubmasks { fine: zero.clone(), mid: zero.clone(), coarse: zero };
        let strata = uniform_strata(16, 16, Stratum::Foreground);
        let out = apply_rain(&img, &strata, &subs, BlendAlpha::rain(0.8).unwrap()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn rain_foreground_arithmetic() {
        let img = NormalizedImage::constant(16, 16, 0.5).unwrap();
        let half = ScalarMask::constant(16, 16, 0.5).unwrap();
        let zero = ScalarMask::zeros(16, 16);
        let subs = RainSubmasks { fine: zero.clone(), mid: zero, coarse: half };
        let strata = uniform_strata(16, 16, Stratum::Foreground);
        let out = apply_rain(&img, &strata, &subs, BlendAlpha::rain(0.8).unwrap()).unwrap();
        for &v in out.data() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn rain_brightens_monotonically() {
        let img = NormalizedImage::from_fn(32, 32, |x, y| {
            [x as f64 / 31.0, y as f64 / 31.0, 0.3]
        })
        .unwrap();
        let base = synthesize_rain_base(&mut ChaCha8Rng::seed_from_u64(4), 32, 32, 30, 90.0);
        let subs = derive_rain_submasks(&base);
        let strata = uniform_strata(32, 32, Stratum::Middleground);
        let out = apply_rain(&img, &strata, &subs, BlendAlpha::rain(1.0).unwrap()).unwrap();
        for (o, i) in out.data().iter().zip(img.data()) {
            assert!(o >= i);
        }
    }

    #[test]
    fn fog_mask_is_deterministic_and_in_range() {
        let a = synthesize_fog_mask(&mut ChaCha8Rng::seed_from_u64(3), 64, 64);
        let b = synthesize_fog_mask(&mut ChaCha8Rng::seed_from_u64(3), 64, 64);
        assert_eq!(a.values, b.values);
        assert!(a.values.values().iter().all(|&v| (0.3..=1.0).contains(&v)));
    }

    #[test]
    fn fog_mask_gradient_is_smooth() {
        let fog = synthesize_fog_mask(&mut ChaCha8Rng::seed_from_u64(12), 512, 512);
        let m = &fog.values;
        let mut total = 0.0;
        let mut count = 0usize;
        for y in 1..511 {
            for x in 1..511 {
                let gx = (m.get(x + 1, y) - m.get(x - 1, y)) / 2.0;
                let gy = (m.get(x, y + 1) - m.get(x, y - 1)) / 2.0;
                total += (gx * gx + gy * gy).sqrt();
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!(mean < 0.02, "mean gradient {mean}");
    }

    #[test]
    fn fog_zero_mask_is_identity() {
        let img = NormalizedImage::constant(16, 16, 0.31).unwrap();
        let depth = FarnessMap::constant(16, 16, 0.9).unwrap();
        let fog = FogMask { values: ScalarMask::zeros(16, 16) };
        let out = apply_fog(&img, &depth, &fog).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn fog_worked_example() {
        // in = 0.5, H = 1, farness = 1: out = 1 - 0.5 * (1 - 0.95) = 0.975 -> byte 249.
        let img = NormalizedImage::constant(16, 16, 0.5).unwrap();
        let depth = FarnessMap::constant(16, 16, 1.0).unwrap();
        let fog = FogMask { values: ScalarMask::constant(16, 16, 1.0).unwrap() };
        let out = apply_fog(&img, &depth, &fog).unwrap();
        assert!((out.data()[0] - 0.975).abs() < 1e-12);
        assert_eq!(crate::raster::denormalize(&out)[0], 249);
    }

    #[test]
    fn fog_monotone_in_farness() {
        let img = NormalizedImage::constant(16, 16, 0.4).unwrap();
        let fog = FogMask { values: ScalarMask::constant(16, 16, 0.8).unwrap() };
        let near = apply_fog(&img, &FarnessMap::constant(16, 16, 0.2).unwrap(), &fog).unwrap();
        let far = apply_fog(&img, &FarnessMap::constant(16, 16, 0.9).unwrap(), &fog).unwrap();
        assert!(far.data()[0] > near.data()[0]);
    }

    #[test]
    fn fog_uniform_reduces_to_affine_map() {
        let depth = FarnessMap::constant(16, 16, 0.7).unwrap();
        let fog = FogMask { values: ScalarMask::constant(16, 16, 0.6).unwrap() };
        let c = FOG_ALPHA * 0.7 * 0.6;
        for v in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let img = NormalizedImage::constant(16, 16, v).unwrap();
            let out = apply_fog(&img, &depth, &fog).unwrap();
            let expected = 1.0 - (1.0 - v) * (1.0 - c);
            assert!((out.data()[0] - expected).abs() < 1e-9);
        }
    }
}
