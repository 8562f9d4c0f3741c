//! Scene-context local blurs: layered defocus over depth strata and
//! per-object motion blur with interaction resolution.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coco::{AnnotationSet, CocoError, ObjectAnnotation};
use crate::depth::{FarnessMap, StrataMap};
use crate::kernel::{convolve_at, gaussian_blur, line_kernel, KernelError};
use crate::plan::SceneContext;
use crate::raster::NormalizedImage;

/// Largest motion magnitude in pixels; keeps PSF kernels bounded.
pub const MAX_MOTION_MAGNITUDE: f64 = 41.0;
/// Magnitudes below this are imperceptible no-ops and are skipped.
pub const MIN_MOTION_MAGNITUDE: f64 = 2.0;
/// Gaussian stds below this leave the layer unblurred.
pub const MIN_EFFECTIVE_STD: f64 = 0.05;
/// Bounding-box overlap above which two objects may interact.
pub const INTERACTION_MIN_IOU: f64 = 0.05;
/// Mean-farness difference below which two objects may interact.
pub const INTERACTION_MAX_FARNESS_GAP: f64 = 0.1;

#[derive(Debug, Error)]
pub enum BlurError {
    #[error("dimension mismatch: {aw}x{ah} vs {bw}x{bh}")]
    DimensionMismatch { aw: usize, ah: usize, bw: usize, bh: usize },
    #[error("motion params reference unknown object {0}")]
    UnknownObject(u64),
    #[error(transparent)]
    Mask(#[from] CocoError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Cumulative defocus blur magnitudes for the three strata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefocusMagnitudes {
    pub lambda_f: f64,
    pub lambda_m: f64,
    pub lambda_b: f64,
}

/// Derives the foreground / middleground / background blur magnitudes from
/// stratum mean depths.
///
/// lambda = 0.5 + 1.5 (delta_f - t) / t, then each ground adds 1.2 (delta - t) / t.
/// The base is floored at 0 and the increments at 0, so the chain
/// lambda <= lambda_m <= lambda_b holds for any ordered deltas.
pub fn defocus_magnitudes(strata: &StrataMap) -> DefocusMagnitudes {
    let t = strata.threshold.value();
    let lambda_f = (0.5 + 1.5 * (strata.delta_f - t) / t).max(0.0);
    let lambda_m = lambda_f + (1.2 * (strata.delta_m - t) / t).max(0.0);
    let lambda_b = lambda_m + (1.2 * (strata.delta_b - t) / t).max(0.0);
    DefocusMagnitudes { lambda_f, lambda_m, lambda_b }
}

/// Blurs each stratum by its magnitude and fuses the layers with a 2-pixel
/// feathered cross-fade at the label boundaries.
pub fn apply_local_defocus(
    img: &NormalizedImage,
    strata: &StrataMap,
    mags: &DefocusMagnitudes,
) -> Result<NormalizedImage, BlurError> {
    if img.width() != strata.width() || img.height() != strata.height() {
        return Err(BlurError::DimensionMismatch {
            aw: img.width(),
            ah: img.height(),
            bw: strata.width(),
            bh: strata.height(),
        });
    }
    let w = img.width();
    let h = img.height();
    let s = crate::kernel::resolution_scale(w, h);
    let std_cap = w.min(h) as f64 / 6.0;
    let mut copies: Vec<NormalizedImage> = Vec::with_capacity(3);
    for lambda in [mags.lambda_f, mags.lambda_m, mags.lambda_b] {
        let std = lambda * s;
        if std < MIN_EFFECTIVE_STD {
            copies.push(img.clone());
        } else {
            copies.push(gaussian_blur(img, std.min(std_cap))?);
        }
    }

    let labels = strata.labels();
    let mut out = img.clone();
    let mut data = vec![0.0f64; img.data().len()];
    for y in 0..h {
        for x in 0..w {
            // 3x3 box feather over labels, edges replicated.
            let mut counts = [0u32; 3];
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    counts[labels[sy * w + sx] as usize] += 1;
                }
            }
            let o = (y * w + x) * 3;
            if let Some(pure) = counts.iter().position(|&c| c == 9) {
                let src = copies[pure].data();
                data[o] = src[o];
                data[o + 1] = src[o + 1];
                data[o + 2] = src[o + 2];
            } else {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for (i, copy) in copies.iter().enumerate() {
                        if counts[i] > 0 {
                            acc += counts[i] as f64 * copy.data()[o + c];
                        }
                    }
                    data[o + c] = (acc / 9.0).clamp(0.0, 1.0);
                }
            }
        }
    }
    out.replace_data(data);
    Ok(out)
}

/// How an object's motion direction is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnglePolicy {
    /// Uniform draw in [0, 180).
    Free,
    /// Always horizontal.
    SnapHorizontal,
    /// Follow the mask's major-axis orientation.
    SnapToEllipse,
}

/// Motion profile for one object superclass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperclassProfile {
    #[serde(rename = "lo")]
    pub magnitude_lo: f64,
    #[serde(rename = "hi")]
    pub magnitude_hi: f64,
    pub rank: u8,
    #[serde(rename = "angle")]
    pub angle_policy: AnglePolicy,
}

impl SuperclassProfile {
    /// Static objects never move by themselves.
    pub fn is_static(&self) -> bool {
        self.magnitude_hi <= 0.0
    }
}

const STATIC_PROFILE: SuperclassProfile = SuperclassProfile {
    magnitude_lo: 0.0,
    magnitude_hi: 0.0,
    rank: 0,
    angle_policy: AnglePolicy::Free,
};

/// Superclass-to-profile lookup with a static fallback for unknown names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuperclassTable {
    profiles: BTreeMap<String, SuperclassProfile>,
}

impl SuperclassTable {
    pub fn profile(&self, supercategory: &str) -> &SuperclassProfile {
        self.profiles.get(supercategory).unwrap_or(&STATIC_PROFILE)
    }

    /// Loads an override table from JSON: `{"vehicle": {"lo":7,"hi":15,"rank":5,"angle":"snap-horizontal"}, ...}`.
    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        let profiles: BTreeMap<String, SuperclassProfile> = serde_json::from_str(s)?;
        Ok(Self { profiles })
    }
}

impl Default for SuperclassTable {
    fn default() -> Self {
        superclass_profiles()
    }
}

/// The built-in motion profile table covering all twelve COCO supercategories.
pub fn superclass_profiles() -> SuperclassTable {
    let mut profiles = BTreeMap::new();
    let mut put = |name: &str, lo: f64, hi: f64, rank: u8, angle_policy: AnglePolicy| {
        profiles.insert(
            name.to_string(),
            SuperclassProfile { magnitude_lo: lo, magnitude_hi: hi, rank, angle_policy },
        );
    };
    put("vehicle", 7.0, 15.0, 5, AnglePolicy::SnapHorizontal);
    put("animal", 4.0, 10.0, 4, AnglePolicy::SnapToEllipse);
    put("person", 3.0, 8.0, 3, AnglePolicy::SnapToEllipse);
    put("sports", 3.0, 10.0, 2, AnglePolicy::Free);
    put("accessory", 0.0, 5.0, 1, AnglePolicy::Free);
    for name in ["food", "furniture", "appliance", "electronic", "indoor", "outdoor", "kitchen"] {
        put(name, 0.0, 0.0, 0, AnglePolicy::Free);
    }
    SuperclassTable { profiles }
}

/// Where an object's motion parameters came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionSource {
    Own,
    Inherited(u64),
}

/// Motion blur parameters for one object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParams {
    pub object_id: u64,
    /// Blur extent in pixels, rounded and capped at [`MAX_MOTION_MAGNITUDE`].
    pub magnitude: f64,
    /// Direction in degrees within [0, 180).
    pub angle_deg: f64,
    pub source: MotionSource,
    /// The object's mean farness, kept for depth-ordered application.
    pub mean_farness: f64,
}

/// Draws an object's motion magnitude and direction.
///
/// The base magnitude comes from the superclass interval, boosted 1.5x for
/// person and sports objects in motion-heavy scenes, then scaled by the
/// nearness factor (2 - mean farness): closer objects smear farther.
pub fn object_motion_params(
    table: &SuperclassTable,
    obj: &ObjectAnnotation,
    scene: &SceneContext,
    depth: &FarnessMap,
    rng: &mut impl Rng,
) -> Result<MotionParams, BlurError> {
    let profile = table.profile(&obj.supercategory);
    let mean_farness = obj.mask.mean_over(depth.values())?;
    if profile.is_static() {
        return Ok(MotionParams {
            object_id: obj.object_id,
            magnitude: 0.0,
            angle_deg: 0.0,
            source: MotionSource::Own,
            mean_farness,
        });
    }
    let mut base = rng.random_range(profile.magnitude_lo..=profile.magnitude_hi);
    if scene.boosts_motion() && matches!(obj.supercategory.as_str(), "person" | "sports") {
        base *= 1.5;
    }
    let magnitude = (base * (2.0 - mean_farness)).round().min(MAX_MOTION_MAGNITUDE);
    let angle_deg = match profile.angle_policy {
        AnglePolicy::SnapHorizontal => 0.0,
        AnglePolicy::SnapToEllipse => obj.mask.orientation_degrees()?,
        AnglePolicy::Free => rng.random_range(0.0..180.0),
    };
    Ok(MotionParams {
        object_id: obj.object_id,
        magnitude,
        angle_deg,
        source: MotionSource::Own,
        mean_farness,
    })
}

/// Propagates motion parameters across interacting objects.
///
/// Two objects interact when their bounding boxes overlap (IoU above 0.05)
/// and their mean farness differs by less than 0.1. Within each connected
/// interaction component every member inherits magnitude and angle from the
/// highest-ranked superclass; ties go to the larger mask, then the lower id.
pub fn resolve_interactions(
    table: &SuperclassTable,
    params: &[MotionParams],
    objects: &AnnotationSet,
    depth: &FarnessMap,
) -> Result<Vec<MotionParams>, BlurError> {
    let _ = depth; // farness gaps come from the params' cached means
    let by_id: BTreeMap<u64, &ObjectAnnotation> =
        objects.objects.iter().map(|o| (o.object_id, o)).collect();
    let n = params.len();
    let mut objs = Vec::with_capacity(n);
    for p in params {
        objs.push(*by_id.get(&p.object_id).ok_or(BlurError::UnknownObject(p.object_id))?);
    }

    // Union-find over interaction pairs.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let iou = objs[i].bbox.iou(&objs[j].bbox);
            let gap = (params[i].mean_farness - params[j].mean_farness).abs();
            if iou > INTERACTION_MIN_IOU && gap < INTERACTION_MAX_FARNESS_GAP {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }

    // Pick the dominating member per component.
    let mut winner: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        let better = match winner.get(&root) {
            None => true,
            Some(&w) => {
                let (rw, ri) = (
                    table.profile(&objs[w].supercategory).rank,
                    table.profile(&objs[i].supercategory).rank,
                );
                let (aw, ai) = (objs[w].mask.count_ones(), objs[i].mask.count_ones());
                (ri, ai, std::cmp::Reverse(params[i].object_id))
                    > (rw, aw, std::cmp::Reverse(params[w].object_id))
            }
        };
        if better {
            winner.insert(root, i);
        }
    }

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(&mut parent, i);
        let w = winner[&root];
        if w == i {
            out.push(params[i]);
        } else {
            out.push(MotionParams {
                object_id: params[i].object_id,
                magnitude: params[w].magnitude,
                angle_deg: params[w].angle_deg,
                source: MotionSource::Inherited(params[w].object_id),
                mean_farness: params[i].mean_farness,
            });
        }
    }
    Ok(out)
}

/// Applies per-object motion blur, farthest objects first.
///
/// Each object's mask is dilated by half its magnitude, convolved with the
/// line PSF, and composited back through a 2-pixel feathered edge. Objects
/// with magnitude below [`MIN_MOTION_MAGNITUDE`] are skipped.
pub fn apply_local_motion_blur(
    img: &NormalizedImage,
    objects: &AnnotationSet,
    params: &[MotionParams],
) -> Result<NormalizedImage, BlurError> {
    if img.width() != objects.width || img.height() != objects.height {
        return Err(BlurError::DimensionMismatch {
            aw: img.width(),
            ah: img.height(),
            bw: objects.width,
            bh: objects.height,
        });
    }
    let by_id: BTreeMap<u64, &ObjectAnnotation> =
        objects.objects.iter().map(|o| (o.object_id, o)).collect();
    let mut order: Vec<&MotionParams> = params.iter().collect();
    order.sort_by(|a, b| {
        b.mean_farness
            .partial_cmp(&a.mean_farness)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.object_id.cmp(&b.object_id))
    });

    let w = img.width();
    let h = img.height();
    let mut work = img.clone();
    for p in order {
        if p.magnitude < MIN_MOTION_MAGNITUDE {
            continue;
        }
        let obj = by_id.get(&p.object_id).ok_or(BlurError::UnknownObject(p.object_id))?;
        let kernel = line_kernel(p.magnitude.round() as usize, p.angle_deg);
        let taps = kernel.taps();
        let dilated = obj.mask.dilate((p.magnitude / 2.0).ceil() as usize);
        let Some((bx0, by0, bx1, by1)) = dilated.bounds() else { continue };
        // Feather spreads one pixel past the dilated mask.
        let x0 = bx0.saturating_sub(1);
        let y0 = by0.saturating_sub(1);
        let x1 = (bx1 + 1).min(w - 1);
        let y1 = (by1 + 1).min(h - 1);

        let mut updates: Vec<(usize, [f64; 3])> = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                let mut count = 0u32;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                        let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                        if dilated.get(sx, sy) {
                            count += 1;
                        }
                    }
                }
                if count == 0 {
                    continue;
                }
                let blurred = convolve_at(&work, &taps, x, y);
                let px = if count == 9 {
                    blurred
                } else {
                    let orig = work.pixel(x, y);
                    let t = f64::from(count);
                    [
                        ((9.0 - t) * orig[0] + t * blurred[0]) / 9.0,
                        ((9.0 - t) * orig[1] + t * blurred[1]) / 9.0,
                        ((9.0 - t) * orig[2] + t * blurred[2]) / 9.0,
                    ]
                };
                updates.push((y * w + x, px));
            }
        }
        for (idx, px) in updates {
            work.set_pixel(idx % w, idx / w, px);
        }
    }
    Ok(work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coco::{BBox, BitMask};
    use crate::depth::{FocusThreshold, Stratum};
    use crate::plan::{Activity, Locale};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn strata_of(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> Stratum,
        deltas: (f64, f64, f64),
        t: f64,
    ) -> StrataMap {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        StrataMap::from_parts(
            width,
            height,
            labels,
            deltas.0,
            deltas.1,
            deltas.2,
            FocusThreshold::new(t).unwrap(),
        )
        .unwrap()
    }

    fn object(id: u64, superclass: &str, mask: BitMask, bbox: BBox) -> ObjectAnnotation {
        ObjectAnnotation {
            object_id: id,
            category: superclass.to_string(),
            supercategory: superclass.to_string(),
            bbox,
            mask,
            is_crowd: false,
        }
    }

    fn rect_mask(w: usize, h: usize, x0: usize, y0: usize, mw: usize, mh: usize) -> BitMask {
        let mut m = BitMask::empty(w, h);
        for y in y0..y0 + mh {
            for x in x0..x0 + mw {
                m.set(x, y, true);
            }
        }
        m
    }

    fn plain_scene() -> SceneContext {
        SceneContext { locale: Locale::Outdoor, activities: Default::default() }
    }

    #[test]
    fn defocus_magnitudes_focused_foreground() {
        let strata = strata_of(8, 8, |_, _| Stratum::Foreground, (0.25, 0.25, 0.25), 0.25);
        let m = defocus_magnitudes(&strata);
        assert_eq!(m.lambda_f, 0.5);
        assert_eq!(m.lambda_m, 0.5);
        assert_eq!(m.lambda_b, 0.5);
    }

    #[test]
    fn defocus_magnitudes_worked_example() {
        let strata = strata_of(8, 8, |_, _| Stratum::Foreground, (0.25, 0.40, 0.70), 0.25);
        let m = defocus_magnitudes(&strata);
        assert!((m.lambda_f - 0.5).abs() < 1e-12);
        assert!((m.lambda_m - 1.22).abs() < 1e-12);
        assert!((m.lambda_b - 3.38).abs() < 1e-12);
    }

    #[test]
    fn defocus_magnitudes_near_focus_foreground() {
        let strata = strata_of(8, 8, |_, _| Stratum::Foreground, (0.4, 0.5, 0.5), 0.5);
        let m = defocus_magnitudes(&strata);
        assert!((m.lambda_f - 0.2).abs() < 1e-12);
    }

    #[test]
    fn defocus_identity_when_all_foreground_zero_lambda() {
        let img = NormalizedImage::from_fn(16, 16, |x, y| {
            [x as f64 / 15.0, y as f64 / 15.0, 0.5]
        })
        .unwrap();
        let strata = strata_of(16, 16, |_, _| Stratum::Foreground, (0.5, 0.5, 0.5), 0.5);
        let mags = DefocusMagnitudes { lambda_f: 0.0, lambda_m: 0.0, lambda_b: 0.0 };
        let out = apply_local_defocus(&img, &strata, &mags).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn defocus_constant_image_unchanged() {
        let img = NormalizedImage::constant(24, 24, 0.6).unwrap();
        let strata = strata_of(
            24,
            24,
            |x, _| if x < 12 { Stratum::Foreground } else { Stratum::Background },
            (0.3, 0.3, 0.9),
            0.3,
        );
        let mags = defocus_magnitudes(&strata);
        let out = apply_local_defocus(&img, &strata, &mags).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn defocus_two_strata_interiors() {
        let img = NormalizedImage::from_fn(48, 48, |x, y| {
            let v = ((x as f64 * 0.9).sin() * 0.5 + 0.5) * ((y as f64 * 0.4).cos() * 0.5 + 0.5);
            [v, 1.0 - v, 0.5 * v + 0.25]
        })
        .unwrap();
        let strata = strata_of(
            48,
            48,
            |x, _| if x < 24 { Stratum::Foreground } else { Stratum::Background },
            (0.25, 0.25, 0.7),
            0.25,
        );
        let mags = DefocusMagnitudes { lambda_f: 0.0, lambda_m: 0.0, lambda_b: 3.38 };
        let out = apply_local_defocus(&img, &strata, &mags).unwrap();

        // Foreground interior (2+ px from the boundary) is bit-equal.
        for y in 0..48 {
            for x in 0..22 {
                assert_eq!(out.pixel(x, y), img.pixel(x, y), "at {x},{y}");
            }
        }
        // Background interior matches the full-image blur.
        let reference = gaussian_blur(&img, 3.38).unwrap();
        for y in 0..48 {
            for x in 26..48 {
                let got = out.pixel(x, y);
                let want = reference.pixel(x, y);
                for c in 0..3 {
                    assert!((got[c] - want[c]).abs() < 1e-6, "at {x},{y},{c}");
                }
            }
        }
    }

    #[test]
    fn profile_table_read_back() {
        let table = superclass_profiles();
        let vehicle = table.profile("vehicle");
        assert_eq!((vehicle.magnitude_lo, vehicle.magnitude_hi), (7.0, 15.0));
        assert_eq!(vehicle.rank, 5);
        assert_eq!(vehicle.angle_policy, AnglePolicy::SnapHorizontal);
        let person = table.profile("person");
        assert_eq!((person.magnitude_lo, person.magnitude_hi), (3.0, 8.0));
        assert_eq!(person.rank, 3);
        assert_eq!(person.angle_policy, AnglePolicy::SnapToEllipse);
        let furniture = table.profile("furniture");
        assert!(furniture.is_static());
        assert_eq!(furniture.rank, 0);
        // Unknown supercategories fall back to static.
        assert!(table.profile("weather").is_static());
    }

    #[test]
    fn profile_table_json_override() {
        let table = SuperclassTable::from_json_str(
            r#"{"vehicle": {"lo": 1.0, "hi": 2.0, "rank": 9, "angle": "free"}}"#,
        )
        .unwrap();
        assert_eq!(table.profile("vehicle").rank, 9);
        assert!(table.profile("person").is_static());
    }

    #[test]
    fn static_objects_never_move() {
        let depth = FarnessMap::constant(16, 16, 0.5).unwrap();
        let obj = object(
            1,
            "furniture",
            rect_mask(16, 16, 2, 2, 5, 5),
            BBox { x: 2.0, y: 2.0, w: 5.0, h: 5.0 },
        );
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p =
                object_motion_params(&superclass_profiles(), &obj, &plain_scene(), &depth, &mut rng)
                    .unwrap();
            assert_eq!(p.magnitude, 0.0);
        }
    }

    #[test]
    fn nearness_scales_magnitude() {
        let table = SuperclassTable::from_json_str(
            r#"{"person": {"lo": 6.0, "hi": 6.0, "rank": 3, "angle": "snap-horizontal"}}"#,
        )
        .unwrap();
        let obj = object(
            1,
            "person",
            rect_mask(16, 16, 2, 2, 5, 5),
            BBox { x: 2.0, y: 2.0, w: 5.0, h: 5.0 },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let far = FarnessMap::constant(16, 16, 1.0).unwrap();
        let p = object_motion_params(&table, &obj, &plain_scene(), &far, &mut rng).unwrap();
        assert_eq!(p.magnitude, 6.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let near = FarnessMap::constant(16, 16, 0.5).unwrap();
        let p = object_motion_params(&table, &obj, &plain_scene(), &near, &mut rng).unwrap();
        assert_eq!(p.magnitude, 9.0);
    }

    #[test]
    fn scene_context_boosts_person() {
        let table = SuperclassTable::from_json_str(
            r#"{"person": {"lo": 4.0, "hi": 4.0, "rank": 3, "angle": "snap-horizontal"}}"#,
        )
        .unwrap();
        let obj = object(
            1,
            "person",
            rect_mask(16, 16, 2, 2, 5, 5),
            BBox { x: 2.0, y: 2.0, w: 5.0, h: 5.0 },
        );
        let depth = FarnessMap::constant(16, 16, 1.0).unwrap();
        let mut scene = plain_scene();
        scene.activities.insert(Activity::Ski);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = object_motion_params(&table, &obj, &scene, &depth, &mut rng).unwrap();
        assert_eq!(p.magnitude, 6.0);
    }

    #[test]
    fn determinism_same_seed_same_params() {
        let depth = FarnessMap::constant(16, 16, 0.7).unwrap();
        let obj = object(
            3,
            "sports",
            rect_mask(16, 16, 4, 4, 6, 3),
            BBox { x: 4.0, y: 4.0, w: 6.0, h: 3.0 },
        );
        let a = object_motion_params(
            &superclass_profiles(),
            &obj,
            &plain_scene(),
            &depth,
            &mut ChaCha8Rng::seed_from_u64(11),
        )
        .unwrap();
        let b = object_motion_params(
            &superclass_profiles(),
            &obj,
            &plain_scene(),
            &depth,
            &mut ChaCha8Rng::seed_from_u64(11),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    fn rider_fixture() -> (AnnotationSet, FarnessMap, Vec<MotionParams>) {
        let width = 32;
        let height = 32;
        // Horse occupies a wide box, person a box overlapping it with IoU 0.4.
        let horse_mask = rect_mask(width, height, 4, 10, 20, 10);
        let person_mask = rect_mask(width, height, 8, 2, 6, 7);
        let horse_bbox = BBox { x: 0.0, y: 0.0, w: 10.0, h: 25.0 };
        let person_bbox = BBox { x: 0.0, y: 0.0, w: 10.0, h: 10.0 };
        assert!((horse_bbox.iou(&person_bbox) - 0.4).abs() < 1e-12);
        let ann = AnnotationSet {
            image_id: 1,
            file_name: String::new(),
            width,
            height,
            objects: vec![
                object(1, "person", person_mask, person_bbox),
                object(2, "animal", horse_mask, horse_bbox),
            ],
        };
        let depth = FarnessMap::constant(width, height, 0.5).unwrap();
        let params = vec![
            MotionParams {
                object_id: 1,
                magnitude: 4.0,
                angle_deg: 90.0,
                source: MotionSource::Own,
                mean_farness: 0.50,
            },
            MotionParams {
                object_id: 2,
                magnitude: 9.0,
                angle_deg: 10.0,
                source: MotionSource::Own,
                mean_farness: 0.52,
            },
        ];
        (ann, depth, params)
    }

    #[test]
    fn rider_inherits_horse_params() {
        let (ann, depth, params) = rider_fixture();
        let resolved =
            resolve_interactions(&superclass_profiles(), &params, &ann, &depth).unwrap();
        assert_eq!(resolved[0].magnitude, 9.0);
        assert_eq!(resolved[0].angle_deg, 10.0);
        assert_eq!(resolved[0].source, MotionSource::Inherited(2));
        assert_eq!(resolved[1].source, MotionSource::Own);
    }

    #[test]
    fn depth_gate_blocks_inheritance() {
        let (ann, depth, mut params) = rider_fixture();
        params[0].mean_farness = 0.1;
        params[1].mean_farness = 0.6;
        let resolved =
            resolve_interactions(&superclass_profiles(), &params, &ann, &depth).unwrap();
        assert_eq!(resolved[0].source, MotionSource::Own);
        assert_eq!(resolved[0].magnitude, 4.0);
    }

    #[test]
    fn disjoint_objects_keep_params() {
        let (ann, depth, mut params) = rider_fixture();
        // Zero-IoU boxes.
        let mut ann = ann;
        ann.objects[0].bbox = BBox { x: 0.0, y: 0.0, w: 4.0, h: 4.0 };
        ann.objects[1].bbox = BBox { x: 20.0, y: 20.0, w: 4.0, h: 4.0 };
        params[0].mean_farness = 0.5;
        params[1].mean_farness = 0.5;
        let resolved =
            resolve_interactions(&superclass_profiles(), &params, &ann, &depth).unwrap();
        assert_eq!(resolved[0], params[0]);
        assert_eq!(resolved[1], params[1]);
    }

    #[test]
    fn resolve_is_idempotent() {
        let (ann, depth, params) = rider_fixture();
        let once = resolve_interactions(&superclass_profiles(), &params, &ann, &depth).unwrap();
        let twice = resolve_interactions(&superclass_profiles(), &once, &ann, &depth).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn motion_blur_zero_magnitudes_is_identity() {
        let img = NormalizedImage::from_fn(16, 16, |x, y| {
            [x as f64 / 15.0, y as f64 / 15.0, 0.3]
        })
        .unwrap();
        let ann = AnnotationSet {
            image_id: 1,
            file_name: String::new(),
            width: 16,
            height: 16,
            objects: vec![object(
                1,
                "person",
                rect_mask(16, 16, 4, 4, 6, 6),
                BBox { x: 4.0, y: 4.0, w: 6.0, h: 6.0 },
            )],
        };
        let params = vec![MotionParams {
            object_id: 1,
            magnitude: 0.0,
            angle_deg: 0.0,
            source: MotionSource::Own,
            mean_farness: 0.5,
        }];
        let out = apply_local_motion_blur(&img, &ann, &params).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn motion_blur_is_local_to_dilated_mask() {
        let img = NormalizedImage::from_fn(48, 48, |x, y| {
            let v = ((x * 13 + y * 7) % 17) as f64 / 16.0;
            [v, 1.0 - v, 0.5]
        })
        .unwrap();
        let mask = rect_mask(48, 48, 20, 20, 8, 8);
        let ann = AnnotationSet {
            image_id: 1,
            file_name: String::new(),
            width: 48,
            height: 48,
            objects: vec![object(1, "person", mask.clone(), BBox { x: 20.0, y: 20.0, w: 8.0, h: 8.0 })],
        };
        let params = vec![MotionParams {
            object_id: 1,
            magnitude: 9.0,
            angle_deg: 0.0,
            source: MotionSource::Own,
            mean_farness: 0.5,
        }];
        let out = apply_local_motion_blur(&img, &ann, &params).unwrap();
        // ceil(9/2) = 5 dilation plus 2 feather pixels.
        let allowed = mask.dilate(7);
        for y in 0..48 {
            for x in 0..48 {
                if !allowed.get(x, y) {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y), "leak at {x},{y}");
                }
            }
        }
        // And the object interior did change.
        assert_ne!(out.pixel(24, 24), img.pixel(24, 24));
    }

    #[test]
    fn motion_blur_constant_image_unchanged() {
        let img = NormalizedImage::constant(24, 24, 0.77).unwrap();
        let ann = AnnotationSet {
            image_id: 1,
            file_name: String::new(),
            width: 24,
            height: 24,
            objects: vec![object(
                1,
                "vehicle",
                rect_mask(24, 24, 6, 6, 10, 8),
                BBox { x: 6.0, y: 6.0, w: 10.0, h: 8.0 },
            )],
        };
        let params = vec![MotionParams {
            object_id: 1,
            magnitude: 11.0,
            angle_deg: 30.0,
            source: MotionSource::Own,
            mean_farness: 0.4,
        }];
        let out = apply_local_motion_blur(&img, &ann, &params).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
