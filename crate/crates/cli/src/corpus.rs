//! Corpus discovery: annotations, scene index, and depth file lookup.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use distort_forge_core::coco::{parse_dataset, AnnotationSet};
use distort_forge_core::plan::{classify_activity, load_scene_index, Locale, PlanImageMeta, SceneContext};

/// Everything known about the input corpus before planning.
pub struct Corpus {
    pub sets: Vec<AnnotationSet>,
    pub locales: BTreeMap<u64, Locale>,
    pub depth_paths: BTreeMap<u64, PathBuf>,
}

impl Corpus {
    pub fn load(
        annotations: &Path,
        scene_index: Option<&Path>,
        depth_dir: Option<&Path>,
    ) -> Result<Self> {
        let bytes = std::fs::read(annotations)
            .with_context(|| format!("reading annotations {}", annotations.display()))?;
        let sets = parse_dataset(&bytes)
            .with_context(|| format!("parsing annotations {}", annotations.display()))?;

        let locales = match scene_index {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .with_context(|| format!("reading scene index {}", path.display()))?;
                let map = load_scene_index(&bytes)
                    .with_context(|| format!("parsing scene index {}", path.display()))?;
                if map.is_empty() {
                    eprintln!("warning: scene index {} is empty; defaulting all images to outdoor", path.display());
                }
                map
            }
            None => {
                eprintln!("warning: no scene index given; defaulting all images to outdoor");
                BTreeMap::new()
            }
        };

        let mut depth_paths = BTreeMap::new();
        if let Some(dir) = depth_dir {
            for set in &sets {
                if let Some(path) = depth_path_for(dir, &set.file_name) {
                    depth_paths.insert(set.image_id, path);
                }
            }
        }
        Ok(Self { sets, locales, depth_paths })
    }

    /// Planner input records, one per image.
    pub fn plan_meta(&self) -> Vec<PlanImageMeta> {
        self.sets
            .iter()
            .map(|set| {
                let locale = self.locales.get(&set.image_id).copied().unwrap_or(Locale::Outdoor);
                PlanImageMeta {
                    image_id: set.image_id,
                    file_name: set.file_name.clone(),
                    scene: SceneContext { locale, activities: classify_activity(set) },
                    has_depth: self.depth_paths.contains_key(&set.image_id),
                    annotations: set.clone(),
                }
            })
            .collect()
    }

    pub fn set_for(&self, image_id: u64) -> Option<&AnnotationSet> {
        self.sets.iter().find(|s| s.image_id == image_id)
    }
}

/// Resolves the depth file matching an image: same stem, depth extension.
pub fn depth_path_for(depth_dir: &Path, file_name: &str) -> Option<PathBuf> {
    let stem = Path::new(file_name).file_stem()?.to_str()?;
    for ext in ["png", "raw", "f32"] {
        let candidate = depth_dir.join(format!("{stem}.{ext}"));
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    None
}
