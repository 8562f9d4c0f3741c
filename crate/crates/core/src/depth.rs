//! Farness maps and smooth-threshold depth stratification.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::coco::AnnotationSet;

/// Smallest farness value after normalization.
pub const FARNESS_FLOOR: f64 = 1.0 / 1024.0;

/// Foreground boundary on the normalized depth excess x = (p - t) / t.
pub const FOREGROUND_CUTOFF: f64 = 0.4;
/// Background boundary on the normalized depth excess.
pub const BACKGROUND_CUTOFF: f64 = 0.6;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("depth raster is constant zero; cannot normalize")]
    DegenerateDepth,
    #[error("depth value {value} at index {index} is not finite and non-negative")]
    BadValue { index: usize, value: f64 },
    #[error("buffer holds {got} values, expected {expected}")]
    BufferLength { got: usize, expected: usize },
    #[error("farness value {value} at index {index} is outside (0,1]")]
    FarnessRange { index: usize, value: f64 },
    #[error("no annotated objects; local defocus is inapplicable")]
    NoAnnotatedObjects,
    #[error("dimension mismatch: {aw}x{ah} vs {bw}x{bh}")]
    DimensionMismatch { aw: usize, ah: usize, bw: usize, bh: usize },
    #[error("focus threshold {0} is outside (0,1]")]
    BadThreshold(f64),
    #[error("depth file header truncated")]
    TruncatedHeader,
    #[error("depth file {path}: unsupported extension (expected .png or .raw)")]
    UnsupportedFormat { path: String },
    #[error("mask: {0}")]
    Mask(#[from] crate::coco::CocoError),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Raw depth raster as loaded from disk, before conversion to farness.
#[derive(Debug, Clone)]
pub struct DepthRaster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, DepthError> {
        if values.len() != width * height {
            return Err(DepthError::BufferLength { got: values.len(), expected: width * height });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DepthError::BadValue { index, value });
            }
        }
        Ok(Self { width, height, values })
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
}

/// Which way the raw depth raster points: larger-is-closer or larger-is-farther.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthConvention {
    Nearness,
    Farness,
}

impl std::str::FromStr for DepthConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearness" => Ok(Self::Nearness),
            "farness" => Ok(Self::Farness),
            other => Err(format!("unknown depth convention {other:?} (nearness|farness)")),
        }
    }
}

/// Per-pixel relative scene depth in (0,1]; larger means farther from camera.
#[derive(Debug, Clone, PartialEq)]
pub struct FarnessMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FarnessMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, DepthError> {
        if values.len() != width * height {
            return Err(DepthError::BufferLength { got: values.len(), expected: width * height });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 || value > 1.0 {
                return Err(DepthError::FarnessRange { index, value });
            }
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, DepthError> {
        Self::new(width, height, vec![value; width * height])
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

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Normalizes a raw depth raster to the canonical farness convention.
///
/// Values are min-max scaled into [FARNESS_FLOOR, 1]; nearness inputs are
/// flipped so larger always means farther. A constant raster maps to an all-1
/// uniform scene; an all-zero raster is degenerate.
pub fn to_farness(raw: &DepthRaster, convention: DepthConvention) -> Result<FarnessMap, DepthError> {
    let min = raw.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == 0.0 {
        return Err(DepthError::DegenerateDepth);
    }
    let values = if max - min < f64::EPSILON * max.max(1.0) {
        vec![1.0; raw.values.len()]
    } else {
        let scale = (1.0 - FARNESS_FLOOR) / (max - min);
        raw.values
            .iter()
            .map(|&v| {
                let n = FARNESS_FLOOR + (v - min) * scale;
                match convention {
                    DepthConvention::Farness => n,
                    DepthConvention::Nearness => 1.0 + FARNESS_FLOOR - n,
                }
            })
            .collect()
    };
    FarnessMap::new(raw.width, raw.height, values)
}

/// Smooth thresholding sigmoid: strictly decreasing, 0.5 at x = 0.5.
pub fn omega(x: f64) -> f64 {
    1.0 - 1.0 / (1.0 + (-15.0 * (x - 0.5)).exp())
}

/// Mean farness of the nearest annotated object: the plane assumed in focus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusThreshold(f64);

impl FocusThreshold {
    pub fn new(value: f64) -> Result<Self, DepthError> {
        if !value.is_finite() || value <= 0.0 || value > 1.0 {
            return Err(DepthError::BadThreshold(value));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Finds the focus plane: the minimum over objects of their mean farness.
pub fn focus_threshold(ann: &AnnotationSet, depth: &FarnessMap) -> Result<FocusThreshold, DepthError> {
    let mut best: Option<f64> = None;
    for obj in &ann.objects {
        let mean = obj.mask.mean_over(depth.values())?;
        best = Some(match best {
            Some(b) => b.min(mean),
            None => mean,
        });
    }
    match best {
        Some(value) => FocusThreshold::new(value),
        None => Err(DepthError::NoAnnotatedObjects),
    }
}

/// Focus plane for scenes without annotations: the nearest point in the map.
pub fn nearest_point_threshold(depth: &FarnessMap) -> FocusThreshold {
    FocusThreshold(depth.min_value())
}

/// One of the three depth layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stratum {
    Foreground,
    Middleground,
    Background,
}

/// Per-pixel stratum labels with the three stratum mean farness values.
#[derive(Debug, Clone)]
pub struct StrataMap {
    width: usize,
    height: usize,
    labels: Vec<Stratum>,
    pub delta_f: f64,
    pub delta_m: f64,
    pub delta_b: f64,
    pub threshold: FocusThreshold,
}

impl StrataMap {
    /// Assembles a strata map from precomputed parts, for synthetic fixtures
    /// and mask-driven pipelines.
    pub fn from_parts(
        width: usize,
        height: usize,
        labels: Vec<Stratum>,
        delta_f: f64,
        delta_m: f64,
        delta_b: f64,
        threshold: FocusThreshold,
    ) -> Result<Self, DepthError> {
        if labels.len() != width * height {
            return Err(DepthError::BufferLength { got: labels.len(), expected: width * height });
        }
        Ok(Self { width, height, labels, delta_f, delta_m, delta_b, threshold })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[Stratum] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> Stratum {
        self.labels[y * self.width + x]
    }

    pub fn count(&self, stratum: Stratum) -> usize {
        self.labels.iter().filter(|&&l| l == stratum).count()
    }
}

/// Labels every pixel foreground / middleground / background around the focus plane.
///
/// The depth excess x = (p - t) / t is compared against the cutoffs at which the
/// sigmoid crosses its published thresholds: foreground for x <= 0.4 (inclusive),
/// middleground for 0.4 < x <= 0.6, background beyond. Empty strata carry the
/// neutral mean delta = t so downstream blur magnitudes gain nothing from them.
pub fn classify_strata(depth: &FarnessMap, threshold: FocusThreshold) -> StrataMap {
    let t = threshold.value();
    let mut labels = Vec::with_capacity(depth.values.len());
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for &p in &depth.values {
        let x = (p - t) / t;
        let stratum = if x <= FOREGROUND_CUTOFF {
            Stratum::Foreground
        } else if x <= BACKGROUND_CUTOFF {
            Stratum::Middleground
        } else {
            Stratum::Background
        };
        let idx = stratum as usize;
        sums[idx] += p;
        counts[idx] += 1;
        labels.push(stratum);
    }
    let delta = |i: usize| if counts[i] == 0 { t } else { sums[i] / counts[i] as f64 };
    StrataMap {
        width: depth.width,
        height: depth.height,
        labels,
        delta_f: delta(0),
        delta_m: delta(1),
        delta_b: delta(2),
        threshold,
    }
}

/// Reads a depth raster: 16-bit grayscale PNG or raw little-endian f32 with
/// an 8-byte (width, height) header, chosen by file extension.
pub fn load_depth(path: &Path) -> Result<DepthRaster, DepthError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => load_depth_png(path),
        Some("raw") | Some("f32") => load_depth_raw(path),
        _ => Err(DepthError::UnsupportedFormat { path: path.display().to_string() }),
    }
}

fn load_depth_png(path: &Path) -> Result<DepthRaster, DepthError> {
    let img = image::open(path)?.to_luma16();
    let values = img.as_raw().iter().map(|&v| f64::from(v)).collect();
    DepthRaster::new(img.width() as usize, img.height() as usize, values)
}

fn load_depth_raw(path: &Path) -> Result<DepthRaster, DepthError> {
    let mut file = std::fs::File::open(path)?;
    let mut header = [0u8; 8];
    file.read_exact(&mut header).map_err(|_| DepthError::TruncatedHeader)?;
    let width = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.len() != width * height * 4 {
        return Err(DepthError::BufferLength { got: bytes.len() / 4, expected: width * height });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    DepthRaster::new(width, height, values)
}

/// Writes a raw f32 depth file in the format [`load_depth`] reads.
pub fn save_depth_raw(raster: &DepthRaster, path: &Path) -> Result<(), DepthError> {
    let mut bytes = Vec::with_capacity(8 + raster.values.len() * 4);
    bytes.extend_from_slice(&(raster.width as u32).to_le_bytes());
    bytes.extend_from_slice(&(raster.height as u32).to_le_bytes());
    for &v in &raster.values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn to_farness_minmax_scaling() {
        let raw = DepthRaster::new(3, 1, vec![1.0, 2.0, 4.0]).unwrap();
        let far = to_farness(&raw, DepthConvention::Farness).unwrap();
        let eps = FARNESS_FLOOR;
        assert!((far.values()[0] - eps).abs() < 1e-12);
        assert!((far.values()[2] - 1.0).abs() < 1e-12);
        let mid = eps + (1.0 - eps) / 3.0;
        assert!((far.values()[1] - mid).abs() < 1e-12);
    }

    #[test]
    fn nearness_conversion_flips_order() {
        let raw = DepthRaster::new(3, 1, vec![1.0, 2.0, 4.0]).unwrap();
        let near = to_farness(&raw, DepthConvention::Nearness).unwrap();
        // Largest raw value = closest, so it gets the smallest farness.
        assert!(near.values()[2] < near.values()[0]);
        assert!((near.values()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_flip_is_identity_within_floor() {
        let raw = DepthRaster::new(4, 1, vec![0.5, 1.5, 3.0, 9.0]).unwrap();
        let far = to_farness(&raw, DepthConvention::Farness).unwrap();
        let flipped: Vec<f64> = far.values().iter().map(|&v| 1.0 + FARNESS_FLOOR - v).collect();
        let back: Vec<f64> = flipped.iter().map(|&v| 1.0 + FARNESS_FLOOR - v).collect();
        for (a, b) in back.iter().zip(far.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_raster_is_uniform_scene() {
        let raw = DepthRaster::new(4, 2, vec![3.3; 8]).unwrap();
        let far = to_farness(&raw, DepthConvention::Farness).unwrap();
        assert!(far.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_raster_is_degenerate() {
        let raw = DepthRaster::new(4, 2, vec![0.0; 8]).unwrap();
        assert!(matches!(
            to_farness(&raw, DepthConvention::Farness),
            Err(DepthError::DegenerateDepth)
        ));
    }

    #[test]
    fn omega_midpoint_and_published_thresholds() {
        assert!((omega(0.5) - 0.5).abs() < 1e-12);
        assert!((omega(0.4) - 0.8176).abs() < 5e-4);
        assert!((omega(0.6) - 0.182).abs() < 5e-4);
        assert!((omega(0.4) - 0.81757).abs() < 1e-5);
        assert!((omega(0.6) - 0.18243).abs() < 1e-5);
    }

    #[test]
    fn classify_uniform_at_threshold_is_all_foreground() {
        let depth = FarnessMap::constant(8, 8, 0.3).unwrap();
        let t = FocusThreshold::new(0.3).unwrap();
        let strata = classify_strata(&depth, t);
        assert_eq!(strata.count(Stratum::Foreground), 64);
        assert!((strata.delta_f - 0.3).abs() < 1e-12);
        // Empty strata carry the neutral threshold sentinel.
        assert_eq!(strata.delta_m, 0.3);
        assert_eq!(strata.delta_b, 0.3);
    }

    #[test]
    fn classify_three_pixels_across_cutoffs() {
        // t = 0.25: farness 0.30, 0.38, 0.50 give x = 0.2, 0.52, 1.0.
        let mut values = vec![0.30; 64];
        values[1] = 0.38;
        values[2] = 0.50;
        let depth = FarnessMap::new(8, 8, values).unwrap();
        let strata = classify_strata(&depth, FocusThreshold::new(0.25).unwrap());
        assert_eq!(strata.label(0, 0), Stratum::Foreground);
        assert_eq!(strata.label(1, 0), Stratum::Middleground);
        assert_eq!(strata.label(2, 0), Stratum::Background);
    }

    #[test]
    fn classify_boundary_x_is_foreground() {
        // x exactly 0.4: p = 1.4 * t.
        let t = 0.5;
        let depth = FarnessMap::constant(8, 8, 1.4 * t).unwrap();
        let strata = classify_strata(&depth, FocusThreshold::new(t).unwrap());
        assert_eq!(strata.count(Stratum::Foreground), 64);
    }

    #[test]
    fn focus_threshold_takes_nearest_object() {
        use crate::coco::{BBox, BitMask, ObjectAnnotation};
        let mut near_mask = BitMask::empty(8, 8);
        near_mask.set(1, 1, true);
        let mut far_mask = BitMask::empty(8, 8);
        far_mask.set(6, 6, true);
        let mut values = vec![0.7; 64];
        values[1 * 8 + 1] = 0.2;
        let depth = FarnessMap::new(8, 8, values).unwrap();
        let object = |id, mask: BitMask| ObjectAnnotation {
            object_id: id,
            category: "thing".into(),
            supercategory: "stuff".into(),
            bbox: BBox { x: 0.0, y: 0.0, w: 2.0, h: 2.0 },
            mask,
            is_crowd: false,
        };
        let ann = AnnotationSet {
            image_id: 1,
            file_name: String::new(),
            width: 8,
            height: 8,
            objects: vec![object(1, near_mask), object(2, far_mask)],
        };
        let t = focus_threshold(&ann, &depth).unwrap();
        assert!((t.value() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn focus_threshold_without_objects_errors() {
        let ann = AnnotationSet {
            image_id: 1,
            file_name: String::new(),
            width: 8,
            height: 8,
            objects: vec![],
        };
        let depth = FarnessMap::constant(8, 8, 0.5).unwrap();
        assert!(matches!(focus_threshold(&ann, &depth), Err(DepthError::NoAnnotatedObjects)));
    }

    #[test]
    fn raw_depth_file_roundtrip() {
        let dir = std::env::temp_dir().join("distort_forge_depth_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.raw");
        let raster = DepthRaster::new(3, 2, vec![0.5, 1.0, 2.0, 3.0, 4.5, 6.0]).unwrap();
        save_depth_raw(&raster, &path).unwrap();
        let back = load_depth(&path).unwrap();
        assert_eq!(back.width(), 3);
        assert_eq!(back.height(), 2);
        for (a, b) in back.values().iter().zip(raster.values()) {
            assert!((a - b).abs() < 1e-6);
        }
        std::fs::remove_file(path).ok();
    }

    proptest! {
        #[test]
        fn omega_symmetry_and_monotonicity(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            prop_assert!((omega(x) + omega(1.0 - x) - 1.0).abs() < 1e-12);
            // Strict decrease, away from f64 saturation of the sigmoid tails.
            if x + 1e-9 < y {
                prop_assert!(omega(x) > omega(y));
            }
        }

        #[test]
        fn strata_partition_raster(seed_vals in proptest::collection::vec(0.01f64..1.0, 64)) {
            let depth = FarnessMap::new(8, 8, seed_vals).unwrap();
            let strata = classify_strata(&depth, FocusThreshold::new(0.4).unwrap());
            let fore = strata.count(Stratum::Foreground);
            let mid = strata.count(Stratum::Middleground);
            let back = strata.count(Stratum::Background);
            prop_assert_eq!(fore + mid + back, 64);
            if fore > 0 && mid > 0 && back > 0 {
                // Means of ordered level sets stay ordered.
                prop_assert!(strata.delta_f <= strata.delta_m + 1e-12);
                prop_assert!(strata.delta_m <= strata.delta_b + 1e-12);
            }
        }

        #[test]
        fn labels_scale_free(scale in 0.1f64..1.0, t in 0.2f64..0.9) {
            let values: Vec<f64> = (0..64).map(|i| 0.05 + 0.9 * (i as f64 / 63.0)).collect();
            let depth_a = FarnessMap::new(8, 8, values.clone()).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let depth_b = FarnessMap::new(8, 8, scaled).unwrap();
            let sa = classify_strata(&depth_a, FocusThreshold::new(t).unwrap());
            let sb = classify_strata(&depth_b, FocusThreshold::new(t * scale).unwrap());
            prop_assert_eq!(sa.labels(), sb.labels());
        }
    }
}
