//! Corpus-level planning: scene context, distortion applicability, and the
//! deterministic quota-deficit assignment that produces a manifest.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coco::AnnotationSet;
use crate::localblur::SuperclassTable;
use crate::photometric::{sample_backlight_draw, PhotometricError};
use crate::seed::{image_seed, plan_rng};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate image id {0} in corpus metadata")]
    DuplicateImageId(u64),
    #[error("ratios: {0}")]
    BadRatios(String),
    #[error("scene index line {line}: {message}")]
    SceneIndex { line: usize, message: String },
    #[error("image {image_id}: no applicable distortion kinds")]
    NothingApplicable { image_id: u64 },
    #[error("image {image_id}: {source}")]
    ParamDraw { image_id: u64, source: PhotometricError },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Indoor/outdoor scene classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locale {
    Indoor,
    Outdoor,
}

/// Activity tags inferred from the objects present in a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Ski,
    Surf,
    Skate,
    Sport,
    Riding,
}

/// Scene context guiding distortion choice and motion magnitudes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneContext {
    pub locale: Locale,
    pub activities: BTreeSet<Activity>,
}

impl SceneContext {
    pub fn outdoor() -> Self {
        Self { locale: Locale::Outdoor, activities: BTreeSet::new() }
    }

    /// Motion-heavy scenes boost person and sports motion magnitudes.
    pub fn boosts_motion(&self) -> bool {
        self.activities.iter().any(|a| {
            matches!(a, Activity::Ski | Activity::Surf | Activity::Skate | Activity::Sport)
        })
    }
}

/// Category lists that map object presence to activity tags; overridable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivityRules {
    pub ski: Vec<String>,
    pub surf: Vec<String>,
    pub skate: Vec<String>,
    pub sport: Vec<String>,
    /// Riding fires when "person" co-occurs with any of these.
    pub riding_partners: Vec<String>,
}

impl Default for ActivityRules {
    fn default() -> Self {
        let list = |items: &[&str]| items.iter().map(|s| s.to_string()).collect();
        Self {
            ski: list(&["skis", "snowboard"]),
            surf: list(&["surfboard"]),
            skate: list(&["skateboard"]),
            sport: list(&[
                "sports ball",
                "tennis racket",
                "baseball bat",
                "baseball glove",
                "frisbee",
                "kite",
            ]),
            riding_partners: list(&["horse", "bicycle", "motorcycle"]),
        }
    }
}

impl ActivityRules {
    pub fn classify(&self, ann: &AnnotationSet) -> BTreeSet<Activity> {
        let categories: BTreeSet<&str> =
            ann.objects.iter().map(|o| o.category.as_str()).collect();
        let mut tags = BTreeSet::new();
        let any_of = |names: &[String]| names.iter().any(|n| categories.contains(n.as_str()));
        if any_of(&self.ski) {
            tags.insert(Activity::Ski);
        }
        if any_of(&self.surf) {
            tags.insert(Activity::Surf);
        }
        if any_of(&self.skate) {
            tags.insert(Activity::Skate);
        }
        if any_of(&self.sport) {
            tags.insert(Activity::Sport);
        }
        if categories.contains("person") && any_of(&self.riding_partners) {
            tags.insert(Activity::Riding);
        }
        tags
    }
}

/// Activity tags under the built-in category lists.
pub fn classify_activity(ann: &AnnotationSet) -> BTreeSet<Activity> {
    ActivityRules::default().classify(ann)
}

/// Parses the scene index: one `image_id,locale` record per line.
pub fn load_scene_index(bytes: &[u8]) -> Result<BTreeMap<u64, Locale>, PlanError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| PlanError::SceneIndex { line: 0, message: format!("not utf-8: {e}") })?;
    let mut map = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (id_part, locale_part) = trimmed.split_once(',').ok_or_else(|| {
            PlanError::SceneIndex { line, message: format!("expected `image_id,locale`, got {trimmed:?}") }
        })?;
        let id: u64 = id_part.trim().parse().map_err(|_| PlanError::SceneIndex {
            line,
            message: format!("bad image id {:?}", id_part.trim()),
        })?;
        let locale = match locale_part.trim() {
            "indoor" => Locale::Indoor,
            "outdoor" => Locale::Outdoor,
            other => {
                return Err(PlanError::SceneIndex {
                    line,
                    message: format!("unknown locale {other:?}"),
                })
            }
        };
        if map.insert(id, locale).is_some() {
            return Err(PlanError::SceneIndex { line, message: format!("duplicate image id {id}") });
        }
    }
    Ok(map)
}

/// The ten distortion kinds, in the distribution table's order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    CompressionArtifact,
    ContrastChange,
    GaussianNoise,
    GlobalMotionBlur,
    GlobalDefocusBlur,
    Fog,
    Rain,
    Backlight,
    LocalDefocusBlur,
    LocalMotionBlur,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 10] = [
        DistortionKind::CompressionArtifact,
        DistortionKind::ContrastChange,
        DistortionKind::GaussianNoise,
        DistortionKind::GlobalMotionBlur,
        DistortionKind::GlobalDefocusBlur,
        DistortionKind::Fog,
        DistortionKind::Rain,
        DistortionKind::Backlight,
        DistortionKind::LocalDefocusBlur,
        DistortionKind::LocalMotionBlur,
    ];

    /// The five intensity-leveled whole-image kinds.
    pub fn is_global(&self) -> bool {
        matches!(
            self,
            DistortionKind::CompressionArtifact
                | DistortionKind::ContrastChange
                | DistortionKind::GaussianNoise
                | DistortionKind::GlobalMotionBlur
                | DistortionKind::GlobalDefocusBlur
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            DistortionKind::CompressionArtifact => "compression_artifact",
            DistortionKind::ContrastChange => "contrast_change",
            DistortionKind::GaussianNoise => "gaussian_noise",
            DistortionKind::GlobalMotionBlur => "global_motion_blur",
            DistortionKind::GlobalDefocusBlur => "global_defocus_blur",
            DistortionKind::Fog => "fog",
            DistortionKind::Rain => "rain",
            DistortionKind::Backlight => "backlight",
            DistortionKind::LocalDefocusBlur => "local_defocus_blur",
            DistortionKind::LocalMotionBlur => "local_motion_blur",
        }
    }
}

impl std::fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for DistortionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DistortionKind::ALL
            .iter()
            .find(|k| k.label() == s)
            .copied()
            .ok_or_else(|| format!("unknown distortion kind {s:?}"))
    }
}

/// Kind plus its frozen parameters, as stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum DistortionSpec {
    CompressionArtifact {},
    ContrastChange { direction: ContrastDirectionParam },
    GaussianNoise {},
    GlobalMotionBlur { angle_deg: f64 },
    GlobalDefocusBlur {},
    Fog {},
    Rain { alpha: f64, angle_deg: f64 },
    Backlight { object_id: u64, b1: f64, b2: f64, gains: [f64; 3] },
    LocalDefocusBlur {},
    LocalMotionBlur {},
}

/// Serialized contrast direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastDirectionParam {
    Increase,
    Decrease,
}

impl DistortionSpec {
    pub fn kind(&self) -> DistortionKind {
        match self {
            DistortionSpec::CompressionArtifact {} => DistortionKind::CompressionArtifact,
            DistortionSpec::ContrastChange { .. } => DistortionKind::ContrastChange,
            DistortionSpec::GaussianNoise {} => DistortionKind::GaussianNoise,
            DistortionSpec::GlobalMotionBlur { .. } => DistortionKind::GlobalMotionBlur,
            DistortionSpec::GlobalDefocusBlur {} => DistortionKind::GlobalDefocusBlur,
            DistortionSpec::Fog {} => DistortionKind::Fog,
            DistortionSpec::Rain { .. } => DistortionKind::Rain,
            DistortionSpec::Backlight { .. } => DistortionKind::Backlight,
            DistortionSpec::LocalDefocusBlur {} => DistortionKind::LocalDefocusBlur,
            DistortionSpec::LocalMotionBlur {} => DistortionKind::LocalMotionBlur,
        }
    }
}

/// One planned image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: u64,
    #[serde(flatten)]
    pub spec: DistortionSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u8>,
    pub seed: u64,
}

/// Assignment counts and achieved fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub total_images: u64,
    pub counts: BTreeMap<DistortionKind, u64>,
    pub achieved: BTreeMap<DistortionKind, f64>,
}

/// The corpus-level plan: every image mapped to one distortion and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub global_seed: u64,
    pub ratios: BTreeMap<DistortionKind, f64>,
    pub entries: Vec<ManifestEntry>,
    pub summary: PlanSummary,
}

impl Manifest {
    pub fn to_json(&self) -> Result<String, PlanError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, PlanError> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

/// Everything the planner needs to know about one corpus image.
#[derive(Debug, Clone)]
pub struct PlanImageMeta {
    pub image_id: u64,
    pub file_name: String,
    pub scene: SceneContext,
    pub has_depth: bool,
    pub annotations: AnnotationSet,
}

/// Target distribution over kinds, fractions summing to 1.
pub type RatioMap = BTreeMap<DistortionKind, f64>;

/// The published distribution, normalized so the fractions sum to exactly 1.
pub fn default_ratios() -> RatioMap {
    let percents = [15.3, 15.4, 15.4, 15.3, 15.1, 0.7, 0.7, 0.3, 6.0, 15.9];
    let total: f64 = percents.iter().sum();
    DistortionKind::ALL.iter().copied().zip(percents.iter().map(|p| p / total)).collect()
}

/// Requires all ten kinds, non-negative, summing to 1 within 1e-6.
pub fn validate_ratios(ratios: &RatioMap) -> Result<(), PlanError> {
    for kind in DistortionKind::ALL {
        match ratios.get(&kind) {
            None => return Err(PlanError::BadRatios(format!("missing kind {kind}"))),
            Some(&v) if !v.is_finite() || v < 0.0 => {
                return Err(PlanError::BadRatios(format!("{kind} has invalid fraction {v}")))
            }
            _ => {}
        }
    }
    if ratios.len() != DistortionKind::ALL.len() {
        return Err(PlanError::BadRatios("unknown extra kinds present".into()));
    }
    let sum: f64 = ratios.values().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(PlanError::BadRatios(format!("fractions sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Which distortion kinds a given image supports.
///
/// Globals always apply. Rain and fog need an outdoor scene and depth. Local
/// defocus needs depth and at least one object. Local motion needs a
/// non-crowd object whose superclass can move; backlight any non-crowd object.
pub fn applicable_kinds(
    scene: &SceneContext,
    ann: &AnnotationSet,
    has_depth: bool,
    table: &SuperclassTable,
) -> Vec<DistortionKind> {
    let mut kinds = vec![
        DistortionKind::CompressionArtifact,
        DistortionKind::ContrastChange,
        DistortionKind::GaussianNoise,
        DistortionKind::GlobalMotionBlur,
        DistortionKind::GlobalDefocusBlur,
    ];
    if scene.locale == Locale::Outdoor && has_depth {
        kinds.push(DistortionKind::Fog);
        kinds.push(DistortionKind::Rain);
    }
    if ann.non_crowd_objects().next().is_some() {
        kinds.push(DistortionKind::Backlight);
    }
    if has_depth && !ann.objects.is_empty() {
        kinds.push(DistortionKind::LocalDefocusBlur);
    }
    if ann.non_crowd_objects().any(|o| !table.profile(&o.supercategory).is_static()) {
        kinds.push(DistortionKind::LocalMotionBlur);
    }
    kinds.sort();
    kinds
}

/// Draws the manifest parameters for one image and kind from its plan stream.
pub fn draw_spec(
    kind: DistortionKind,
    meta: &PlanImageMeta,
    rng: &mut impl Rng,
) -> Result<(DistortionSpec, Option<u8>), PlanError> {
    let level = if kind.is_global() {
        let max_level = match meta.scene.locale {
            Locale::Indoor => 3,
            Locale::Outdoor => 5,
        };
        Some(rng.random_range(1..=max_level))
    } else {
        None
    };
    let spec = match kind {
        DistortionKind::CompressionArtifact => DistortionSpec::CompressionArtifact {},
        DistortionKind::ContrastChange => DistortionSpec::ContrastChange {
            direction: if rng.random::<bool>() {
                ContrastDirectionParam::Increase
            } else {
                ContrastDirectionParam::Decrease
            },
        },
        DistortionKind::GaussianNoise => DistortionSpec::GaussianNoise {},
        DistortionKind::GlobalMotionBlur => {
            DistortionSpec::GlobalMotionBlur { angle_deg: rng.random_range(0.0..180.0) }
        }
        DistortionKind::GlobalDefocusBlur => DistortionSpec::GlobalDefocusBlur {},
        DistortionKind::Fog => DistortionSpec::Fog {},
        DistortionKind::Rain => DistortionSpec::Rain {
            alpha: rng.random_range(crate::atmos::RAIN_ALPHA_RANGE.0..=crate::atmos::RAIN_ALPHA_RANGE.1),
            angle_deg: rng.random_range(75.0..=105.0),
        },
        DistortionKind::Backlight => {
            let draw = sample_backlight_draw(&meta.annotations, rng)
                .map_err(|source| PlanError::ParamDraw { image_id: meta.image_id, source })?;
            DistortionSpec::Backlight {
                object_id: draw.object_id,
                b1: draw.b1,
                b2: draw.b2,
                gains: draw.gains,
            }
        }
        DistortionKind::LocalDefocusBlur => DistortionSpec::LocalDefocusBlur {},
        DistortionKind::LocalMotionBlur => DistortionSpec::LocalMotionBlur {},
    };
    Ok((spec, level))
}

/// Builds the corpus plan by greedy quota-deficit assignment.
///
/// Images are visited in stable-hash order; each takes the applicable kind
/// with the largest remaining quota deficit, ties broken by table order.
/// Unsatisfiable quotas spill into whatever remains applicable; the summary
/// records the achieved fractions.
pub fn build_plan(
    images: &[PlanImageMeta],
    ratios: &RatioMap,
    global_seed: u64,
    table: &SuperclassTable,
) -> Result<Manifest, PlanError> {
    if images.is_empty() {
        return Err(PlanError::EmptyCorpus);
    }
    validate_ratios(ratios)?;
    let mut seen = BTreeSet::new();
    for meta in images {
        if !seen.insert(meta.image_id) {
            return Err(PlanError::DuplicateImageId(meta.image_id));
        }
    }

    let n = images.len() as f64;
    let quotas: BTreeMap<DistortionKind, f64> =
        ratios.iter().map(|(&k, &r)| (k, r * n)).collect();
    let mut counts: BTreeMap<DistortionKind, u64> =
        DistortionKind::ALL.iter().map(|&k| (k, 0)).collect();

    let mut order: Vec<usize> = (0..images.len()).collect();
    order.sort_by_key(|&i| (image_seed(global_seed, images[i].image_id), images[i].image_id));

    let mut entries = Vec::with_capacity(images.len());
    for i in order {
        let meta = &images[i];
        let applicable = applicable_kinds(&meta.scene, &meta.annotations, meta.has_depth, table);
        let mut best: Option<(DistortionKind, f64)> = None;
        for &kind in &applicable {
            let deficit = quotas[&kind] - counts[&kind] as f64;
            if best.map_or(true, |(_, d)| deficit > d) {
                best = Some((kind, deficit));
            }
        }
        let (kind, _) =
            best.ok_or(PlanError::NothingApplicable { image_id: meta.image_id })?;
        *counts.get_mut(&kind).unwrap() += 1;

        let seed = image_seed(global_seed, meta.image_id);
        let mut rng = plan_rng(seed);
        let (spec, level) = draw_spec(kind, meta, &mut rng)?;
        entries.push(ManifestEntry { image_id: meta.image_id, spec, level, seed });
    }
    entries.sort_by_key(|e| e.image_id);

    let achieved = counts.iter().map(|(&k, &c)| (k, c as f64 / n)).collect();
    Ok(Manifest {
        global_seed,
        ratios: ratios.clone(),
        entries,
        summary: PlanSummary { total_images: images.len() as u64, counts, achieved },
    })
}

/// One problem found while validating a manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    EmptyManifest,
    MissingImage { image_id: u64 },
    UnknownImage { image_id: u64 },
    DuplicateEntry { image_id: u64 },
    NotApplicable { image_id: u64, kind: DistortionKind },
    BadSeed { image_id: u64, expected: u64, got: u64 },
    BadLevel { image_id: u64, level: Option<u8> },
    SummaryMismatch { kind: DistortionKind, counted: u64, recorded: u64 },
}

/// Machine-readable validation outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub total_entries: u64,
    pub violations: Vec<Violation>,
    /// Achieved minus target fraction per kind.
    pub deviation: BTreeMap<DistortionKind, f64>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks coverage, applicability, seed derivation, level bounds, and summary
/// consistency of a manifest against the corpus it claims to plan.
pub fn validate_manifest(
    manifest: &Manifest,
    images: &[PlanImageMeta],
    table: &SuperclassTable,
) -> ValidationReport {
    let mut violations = Vec::new();
    if manifest.entries.is_empty() {
        violations.push(Violation::EmptyManifest);
    }

    let by_id: BTreeMap<u64, &PlanImageMeta> =
        images.iter().map(|m| (m.image_id, m)).collect();
    let mut seen: BTreeSet<u64> = BTreeSet::new();
    let mut counts: BTreeMap<DistortionKind, u64> =
        DistortionKind::ALL.iter().map(|&k| (k, 0)).collect();

    for entry in &manifest.entries {
        if !seen.insert(entry.image_id) {
            violations.push(Violation::DuplicateEntry { image_id: entry.image_id });
            continue;
        }
        let kind = entry.spec.kind();
        *counts.get_mut(&kind).unwrap() += 1;

        let Some(meta) = by_id.get(&entry.image_id) else {
            violations.push(Violation::UnknownImage { image_id: entry.image_id });
            continue;
        };
        let applicable = applicable_kinds(&meta.scene, &meta.annotations, meta.has_depth, table);
        if !applicable.contains(&kind) {
            violations.push(Violation::NotApplicable { image_id: entry.image_id, kind });
        }
        let expected = image_seed(manifest.global_seed, entry.image_id);
        if entry.seed != expected {
            violations.push(Violation::BadSeed {
                image_id: entry.image_id,
                expected,
                got: entry.seed,
            });
        }
        let level_ok = if kind.is_global() {
            match (entry.level, meta.scene.locale) {
                (Some(l), Locale::Indoor) => (1..=3).contains(&l),
                (Some(l), Locale::Outdoor) => (1..=5).contains(&l),
                (None, _) => false,
            }
        } else {
            entry.level.is_none()
        };
        if !level_ok {
            violations.push(Violation::BadLevel { image_id: entry.image_id, level: entry.level });
        }
    }
    for meta in images {
        if !seen.contains(&meta.image_id) {
            violations.push(Violation::MissingImage { image_id: meta.image_id });
        }
    }
    for (&kind, &counted) in &counts {
        let recorded = manifest.summary.counts.get(&kind).copied().unwrap_or(0);
        if counted != recorded {
            violations.push(Violation::SummaryMismatch { kind, counted, recorded });
        }
    }

    let total = manifest.entries.len().max(1) as f64;
    let deviation = DistortionKind::ALL
        .iter()
        .map(|&k| {
            let achieved = counts[&k] as f64 / total;
            let target = manifest.ratios.get(&k).copied().unwrap_or(0.0);
            (k, achieved - target)
        })
        .collect();

    ValidationReport { total_entries: manifest.entries.len() as u64, violations, deviation }
}
