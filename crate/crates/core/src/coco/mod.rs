//! COCO detection-format ground truth: parsing, mask decoding, and geometry.

mod mask;
mod polygon;
mod rle;

pub use mask::{bbox_iou, mask_mean_over, mask_orientation, BBox, BitMask};
pub use polygon::rasterize_polygon;
pub use rle::{decode_rle, decode_rle_string, encode_rle, encode_rle_string};

use std::collections::{BTreeMap, HashSet};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CocoError {
    #[error("parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse { offset: usize, line: usize, column: usize, message: String },
    #[error("annotation {annotation_id} references unknown image {image_id}")]
    UnknownImage { annotation_id: u64, image_id: u64 },
    #[error("annotation {annotation_id} references unknown category {category_id}")]
    UnknownCategory { annotation_id: u64, category_id: u64 },
    #[error("duplicate annotation id {0}")]
    DuplicateAnnotation(u64),
    #[error("duplicate image id {0}")]
    DuplicateImage(u64),
    #[error("duplicate category id {0}")]
    DuplicateCategory(u64),
    #[error("annotation {annotation_id}: unsupported segmentation variant")]
    UnsupportedSegmentation { annotation_id: u64 },
    #[error("annotation {annotation_id}: segmentation size {got_h}x{got_w} does not match image {h}x{w}")]
    SegmentationSize { annotation_id: u64, got_h: usize, got_w: usize, h: usize, w: usize },
    #[error("annotation {annotation_id}: mask has no pixels inside the raster")]
    EmptyMask { annotation_id: u64 },
    #[error("annotation {annotation_id}: bbox degenerate after clamping to image bounds")]
    BadBBox { annotation_id: u64 },
    #[error("image {image_id}: dimensions {width}x{height} invalid")]
    BadImageDims { image_id: u64, width: i64, height: i64 },
    #[error("run lengths sum to {got}, expected {expected} for {height}x{width}")]
    RleLength { got: u64, expected: u64, height: usize, width: usize },
    #[error("invalid rle string byte {byte:#x} at position {pos}")]
    RleString { byte: u8, pos: usize },
    #[error("polygon needs at least 3 vertices, got {0}")]
    DegeneratePolygon(usize),
    #[error("polygon coordinates must be finite")]
    NonFinitePolygon,
    #[error("mask is empty")]
    EmptyMaskGeometry,
    #[error("field length {got} does not match mask size {expected}")]
    FieldLength { got: usize, expected: usize },
}

/// One annotated object joined with its category and decoded mask.
#[derive(Debug, Clone)]
pub struct ObjectAnnotation {
    pub object_id: u64,
    pub category: String,
    pub supercategory: String,
    pub bbox: BBox,
    pub mask: BitMask,
    pub is_crowd: bool,
}

/// All annotations of one image, dimensions included.
#[derive(Debug, Clone)]
pub struct AnnotationSet {
    pub image_id: u64,
    pub file_name: String,
    pub width: usize,
    pub height: usize,
    pub objects: Vec<ObjectAnnotation>,
}

impl AnnotationSet {
    /// Objects eligible for per-object distortions (crowd regions excluded).
    pub fn non_crowd_objects(&self) -> impl Iterator<Item = &ObjectAnnotation> {
        self.objects.iter().filter(|o| !o.is_crowd)
    }
}

#[derive(Deserialize)]
struct WireDataset {
    #[serde(default)]
    images: Vec<WireImage>,
    #[serde(default)]
    annotations: Vec<WireAnnotation>,
    #[serde(default)]
    categories: Vec<WireCategory>,
}

#[derive(Deserialize)]
struct WireImage {
    id: u64,
    #[serde(default)]
    file_name: String,
    width: i64,
    height: i64,
}

#[derive(Deserialize)]
struct WireAnnotation {
    #[serde(default)]
    id: u64,
    image_id: u64,
    category_id: u64,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
    #[serde(default)]
    segmentation: Option<serde_json::Value>,
    #[serde(default, deserialize_with = "deserialize_iscrowd")]
    iscrowd: bool,
}

#[derive(Deserialize)]
struct WireCategory {
    id: u64,
    name: String,
    #[serde(default)]
    supercategory: Option<String>,
}

fn deserialize_iscrowd<'de, D>(deserializer: D) -> Result<bool, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum IsCrowd {
        Bool(bool),
        Int(i64),
    }
    Ok(match Option::<IsCrowd>::deserialize(deserializer)? {
        Some(IsCrowd::Bool(b)) => b,
        Some(IsCrowd::Int(i)) => i != 0,
        None => false,
    })
}

/// Parses a COCO detection-format JSON document into per-image annotation sets.
///
/// Every image in the document yields a set, including images without
/// annotations. Dangling image or category references, duplicate ids, and
/// undecodable segmentations are integrity errors naming the offending id.
pub fn parse_dataset(bytes: &[u8]) -> Result<Vec<AnnotationSet>, CocoError> {
    let wire: WireDataset = serde_json::from_slice(bytes).map_err(|e| {
        let line = e.line();
        let column = e.column();
        CocoError::Parse {
            offset: byte_offset(bytes, line, column),
            line,
            column,
            message: e.to_string(),
        }
    })?;

    let mut categories: BTreeMap<u64, (String, String)> = BTreeMap::new();
    for cat in &wire.categories {
        let super_name = cat.supercategory.clone().unwrap_or_default();
        if categories.insert(cat.id, (cat.name.clone(), super_name)).is_some() {
            return Err(CocoError::DuplicateCategory(cat.id));
        }
    }

    let mut sets: BTreeMap<u64, AnnotationSet> = BTreeMap::new();
    for img in &wire.images {
        if img.width <= 0 || img.height <= 0 || img.width > 1 << 20 || img.height > 1 << 20 {
            return Err(CocoError::BadImageDims {
                image_id: img.id,
                width: img.width,
                height: img.height,
            });
        }
        let set = AnnotationSet {
            image_id: img.id,
            file_name: img.file_name.clone(),
            width: img.width as usize,
            height: img.height as usize,
            objects: Vec::new(),
        };
        if sets.insert(img.id, set).is_some() {
            return Err(CocoError::DuplicateImage(img.id));
        }
    }

    let mut seen_annotations: HashSet<u64> = HashSet::new();
    for ann in &wire.annotations {
        if !seen_annotations.insert(ann.id) {
            return Err(CocoError::DuplicateAnnotation(ann.id));
        }
        let set = sets.get_mut(&ann.image_id).ok_or(CocoError::UnknownImage {
            annotation_id: ann.id,
            image_id: ann.image_id,
        })?;
        let (category, supercategory) =
            categories.get(&ann.category_id).cloned().ok_or(CocoError::UnknownCategory {
                annotation_id: ann.id,
                category_id: ann.category_id,
            })?;

        let (width, height) = (set.width, set.height);
        let mask = decode_segmentation(ann, width, height)?;
        if mask.is_empty() {
            return Err(CocoError::EmptyMask { annotation_id: ann.id });
        }

        let bbox = match ann.bbox {
            Some([x, y, w, h]) if [x, y, w, h].iter().all(|v| v.is_finite()) => {
                BBox { x, y, w, h }.clamp_to(width, height)
            }
            _ => bbox_of_mask(&mask),
        };
        if bbox.w <= 0.0 || bbox.h <= 0.0 {
            return Err(CocoError::BadBBox { annotation_id: ann.id });
        }

        set.objects.push(ObjectAnnotation {
            object_id: ann.id,
            category,
            supercategory,
            bbox,
            mask,
            is_crowd: ann.iscrowd,
        });
    }

    let mut out: Vec<AnnotationSet> = sets.into_values().collect();
    for set in &mut out {
        set.objects.sort_by_key(|o| o.object_id);
    }
    Ok(out)
}

fn bbox_of_mask(mask: &BitMask) -> BBox {
    match mask.bounds() {
        Some((x0, y0, x1, y1)) => BBox {
            x: x0 as f64,
            y: y0 as f64,
            w: (x1 - x0 + 1) as f64,
            h: (y1 - y0 + 1) as f64,
        },
        None => BBox { x: 0.0, y: 0.0, w: 0.0, h: 0.0 },
    }
}

fn decode_segmentation(
    ann: &WireAnnotation,
    width: usize,
    height: usize,
) -> Result<BitMask, CocoError> {
    use serde_json::Value;
    let unsupported = || CocoError::UnsupportedSegmentation { annotation_id: ann.id };
    let seg = ann.segmentation.as_ref().ok_or_else(unsupported)?;
    match seg {
        // Polygon form: array of flat coordinate arrays, OR-combined.
        Value::Array(polys) => {
            if polys.is_empty() {
                return Err(unsupported());
            }
            let mut mask = BitMask::empty(width, height);
            for poly in polys {
                let Value::Array(coords) = poly else { return Err(unsupported()) };
                let mut points = Vec::with_capacity(coords.len());
                for c in coords {
                    points.push(c.as_f64().ok_or_else(unsupported)?);
                }
                let part = rasterize_polygon(&points, width, height)?;
                mask.or_assign(&part)?;
            }
            Ok(mask)
        }
        // RLE form: {"size": [h, w], "counts": string | [int]}.
        Value::Object(obj) => {
            let size = obj.get("size").and_then(Value::as_array).ok_or_else(unsupported)?;
            if size.len() != 2 {
                return Err(unsupported());
            }
            let got_h = size[0].as_u64().ok_or_else(unsupported)? as usize;
            let got_w = size[1].as_u64().ok_or_else(unsupported)? as usize;
            if got_h != height || got_w != width {
                return Err(CocoError::SegmentationSize {
                    annotation_id: ann.id,
                    got_h,
                    got_w,
                    h: height,
                    w: width,
                });
            }
            match obj.get("counts") {
                Some(Value::String(s)) => decode_rle_string(s, height, width),
                Some(Value::Array(items)) => {
                    let mut counts = Vec::with_capacity(items.len());
                    for item in items {
                        counts.push(item.as_u64().ok_or_else(unsupported)?);
                    }
                    decode_rle(&counts, height, width)
                }
                _ => Err(unsupported()),
            }
        }
        _ => Err(unsupported()),
    }
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current_line = 1usize;
    let mut offset = 0usize;
    for (i, &b) in bytes.iter().enumerate() {
        if current_line == line {
            offset = i;
            break;
        }
        if b == b'\n' {
            current_line += 1;
            offset = i + 1;
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}
