use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::labels::{parse_label_file, LabelEntry, LabelError};
use super::manifest::{label_path_for, DatasetManifest, ManifestError, Split};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {source}")]
    Label {
        path: PathBuf,
        #[source]
        source: LabelError,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub images: usize,
    pub boxes: usize,
    pub unlabeled_images: usize,
    /// Images containing at least one box of each class.
    pub class_images: Vec<usize>,
    pub class_boxes: Vec<usize>,
}

impl SplitStats {
    fn new(nc: usize) -> Self {
        Self {
            class_images: vec![0; nc],
            class_boxes: vec![0; nc],
            ..Default::default()
        }
    }

    fn add(&mut self, entries: Option<&[LabelEntry]>) {
        self.images += 1;
        let entries = entries.unwrap_or(&[]);
        if entries.is_empty() {
            self.unlabeled_images += 1;
            return;
        }
        self.boxes += entries.len();
        let mut seen = vec![false; self.class_images.len()];
        for e in entries {
            self.class_boxes[e.class_id] += 1;
            seen[e.class_id] = true;
        }
        for (count, hit) in self.class_images.iter_mut().zip(seen) {
            *count += hit as usize;
        }
    }

    fn merge(&mut self, other: &SplitStats) {
        self.images += other.images;
        self.boxes += other.boxes;
        self.unlabeled_images += other.unlabeled_images;
        for (a, b) in self.class_images.iter_mut().zip(&other.class_images) {
            *a += b;
        }
        for (a, b) in self.class_boxes.iter_mut().zip(&other.class_boxes) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub names: Vec<String>,
    pub splits: BTreeMap<String, SplitStats>,
    pub total: SplitStats,
}

impl DatasetStats {
    pub fn total_images(&self) -> usize {
        self.total.images
    }
}

/// Reads the labels of one image. A missing label file is a negative sample.
pub fn read_labels(image: &Path, nc: usize) -> Result<Option<Vec<LabelEntry>>, StatsError> {
    let path = label_path_for(image);
    match std::fs::read_to_string(&path) {
        Ok(text) => parse_label_file(&text, nc)
            .map(Some)
            .map_err(|source| StatsError::Label { path, source }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(StatsError::Io { path, source }),
    }
}

pub fn dataset_stats(manifest: &DatasetManifest) -> Result<DatasetStats, StatsError> {
    let nc = manifest.nc;
    let mut splits = BTreeMap::new();
    let mut total = SplitStats::new(nc);
    for split in Split::ALL {
        if manifest.split_paths(split).is_empty() {
            continue;
        }
        let images = manifest.list_images(split)?;
        let labels: Vec<Option<Vec<LabelEntry>>> = images
            .par_iter()
            .map(|img| read_labels(img, nc))
            .collect::<Result<_, _>>()?;
        let mut stats = SplitStats::new(nc);
        for l in &labels {
            stats.add(l.as_deref());
        }
        total.merge(&stats);
        splits.insert(split.key().to_string(), stats);
    }
    Ok(DatasetStats {
        names: manifest.names.clone(),
        splits,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

/// Collects every label problem in the dataset instead of stopping at the first.
pub fn validate_dataset(manifest: &DatasetManifest) -> Result<Vec<Finding>, ManifestError> {
    let mut images = Vec::new();
    for split in Split::ALL {
        if !manifest.split_paths(split).is_empty() {
            images.extend(manifest.list_images(split)?);
        }
    }
    let findings: Vec<Vec<Finding>> = images
        .par_iter()
        .map(|img| match read_labels(img, manifest.nc) {
            Ok(Some(entries)) => entries
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.bbox.is_valid())
                .map(|(i, e)| Finding {
                    path: label_path_for(img),
                    line: Some(i + 1),
                    message: format!("box {:?} extends outside the image or has no area", e.bbox),
                })
                .collect(),
            Ok(None) => Vec::new(),
            Err(StatsError::Label { path, source }) => vec![Finding {
                path,
                line: Some(source.line()),
                message: source.to_string(),
            }],
            Err(other) => vec![Finding {
                path: img.clone(),
                line: None,
                message: other.to_string(),
            }],
        })
        .collect();
    Ok(findings.into_iter().flatten().collect())
}
