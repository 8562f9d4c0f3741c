//! Deterministic, depth-aware image distortion synthesis.
//!
//! The crate covers the full pipeline: pixel primitives and convolution,
//! COCO ground-truth parsing, depth stratification, the local and
//! atmospheric distortion operators, global photometric distortions, and
//! the corpus planner that assigns one seeded distortion per image.

pub mod atmos;
pub mod coco;
pub mod depth;
pub mod kernel;
pub mod localblur;
pub mod photometric;
pub mod plan;
pub mod raster;
pub mod seed;

pub use coco::{AnnotationSet, BBox, BitMask, ObjectAnnotation};
pub use depth::{DepthConvention, FarnessMap, FocusThreshold, StrataMap, Stratum};
pub use kernel::Kernel2D;
pub use plan::{DistortionKind, DistortionSpec, Manifest, ManifestEntry, SceneContext};
pub use raster::{NormalizedImage, ScalarMask};
