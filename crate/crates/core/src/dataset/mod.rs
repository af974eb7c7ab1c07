//! YOLO-format dataset tooling: labels, manifests, frame ingestion,
//! augmentation, splitting and statistics.

pub mod augment;
pub mod build;
pub mod ingest;
pub mod labels;
pub mod manifest;
pub mod split;
pub mod stats;

pub use augment::{augment_noise, augment_rotate, resize_with_boxes, AugmentSpec};
pub use build::{augment_dataset, build_dataset, AugmentPlan, BuildOptions, BuildReport};
pub use ingest::{frame_extraction_command, ingest_frames};
pub use labels::{parse_label_file, write_label_file, LabelEntry, LabelError};
pub use manifest::{load_manifest, DatasetManifest, ManifestError, Split};
pub use split::split_dataset;
pub use stats::{dataset_stats, validate_dataset, DatasetStats, Finding};

use std::path::PathBuf;

/// One image with its ground-truth boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image_path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<LabelEntry>,
}
