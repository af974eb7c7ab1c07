//! Builds a YOLO dataset tree (`images/<split>`, `labels/<split>`, `data.yaml`)
//! from annotated frames, optionally adding augmented copies.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use walkdir::WalkDir;

use super::augment::{augment_sample, item_seed, resize_with_boxes, AugmentError, AugmentSpec};
use super::ingest::{ingest_frames, IngestError};
use super::labels::{write_label_file, LabelEntry};
use super::manifest::{is_image_path, DatasetManifest, ManifestError, Split};
use super::split::{split_dataset, SplitError};
use super::stats::{read_labels, StatsError};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Labels(#[from] StatsError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("image {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no annotated images found under {0}")]
    NoImages(PathBuf),
}

#[derive(Debug, Clone)]
pub struct AugmentPlan {
    pub spec: AugmentSpec,
    /// Augmented copies written per source image, in addition to the original.
    pub copies: usize,
    pub splits: Vec<Split>,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub src: PathBuf,
    pub out: PathBuf,
    pub stride: usize,
    pub names: Vec<String>,
    pub resize: Option<(u32, u32)>,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub augment: Option<AugmentPlan>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildReport {
    pub train_images: usize,
    pub val_images: usize,
    pub test_images: usize,
    /// Boxes removed because rotation pushed them out of frame.
    pub dropped_boxes: usize,
}

impl BuildReport {
    pub fn total(&self) -> usize {
        self.train_images + self.val_images + self.test_images
    }
}

struct Item {
    split: Split,
    source: PathBuf,
    name: String,
    labels: Vec<LabelEntry>,
}

fn output_name(src_root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(src_root).unwrap_or(path).with_extension("");
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("__")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BuildError + '_ {
    move |source| BuildError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_pair(out: &Path, split: Split, name: &str, image: &image::RgbImage, labels: &[LabelEntry]) -> Result<(), BuildError> {
    let img_path = out.join("images").join(split.key()).join(format!("{name}.png"));
    let lbl_path = out.join("labels").join(split.key()).join(format!("{name}.txt"));
    image.save(&img_path).map_err(|source| BuildError::Image {
        path: img_path.clone(),
        source,
    })?;
    std::fs::write(&lbl_path, write_label_file(labels)).map_err(io_err(&lbl_path))
}

/// Writes all items; returns boxes dropped by augmentation.
fn write_items(
    items: &[Item],
    out: &Path,
    resize: Option<(u32, u32)>,
    augment: Option<&AugmentPlan>,
    seed: u64,
) -> Result<usize, BuildError> {
    for split in Split::ALL {
        for kind in ["images", "labels"] {
            let dir = out.join(kind).join(split.key());
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
    }
    let dropped: Vec<usize> = items
        .par_iter()
        .enumerate()
        .map(|(idx, item)| -> Result<usize, BuildError> {
            let img = image::open(&item.source)
                .map_err(|source| BuildError::Image {
                    path: item.source.clone(),
                    source,
                })?
                .to_rgb8();
            let (base, labels) = match resize {
                Some((w, h)) => resize_with_boxes(&img, &item.labels, w, h),
                None => (img, item.labels.clone()),
            };
            write_pair(out, item.split, &item.name, &base, &labels)?;
            let mut dropped = 0;
            if let Some(plan) = augment.filter(|p| p.splits.contains(&item.split)) {
                let spec = AugmentSpec {
                    target_w: base.width(),
                    target_h: base.height(),
                    ..plan.spec
                };
                for copy in 0..plan.copies {
                    let s = item_seed(seed, (idx * plan.copies + copy) as u64);
                    let (aug, aug_labels, _) = augment_sample(&base, &labels, &spec, s);
                    dropped += labels.len() - aug_labels.len();
                    write_pair(out, item.split, &format!("{}_aug{copy}", item.name), &aug, &aug_labels)?;
                }
            }
            Ok(dropped)
        })
        .collect::<Result<_, _>>()?;
    Ok(dropped.into_iter().sum())
}

fn finish(
    out: &Path,
    items: &[Item],
    names: Vec<String>,
    augment: Option<&AugmentPlan>,
    dropped_boxes: usize,
    split_record: Option<(u64, [f64; 3])>,
) -> Result<BuildReport, BuildError> {
    let root = std::path::absolute(out).map_err(io_err(out))?;
    let copies_for = |split: Split| match augment {
        Some(p) if p.splits.contains(&split) => 1 + p.copies,
        _ => 1,
    };
    let count = |split: Split| items.iter().filter(|i| i.split == split).count() * copies_for(split);
    let report = BuildReport {
        train_images: count(Split::Train),
        val_images: count(Split::Val),
        test_images: count(Split::Test),
        dropped_boxes,
    };
    let manifest = DatasetManifest {
        train: vec![root.join("images/train")],
        val: vec![root.join("images/val")],
        test: if report.test_images > 0 {
            vec![root.join("images/test")]
        } else {
            vec![]
        },
        root,
        nc: names.len(),
        names,
        split_seed: split_record.map(|r| r.0),
        split_ratios: split_record.map(|r| r.1),
    };
    manifest.validate()?;
    manifest.write(&out.join("data.yaml"))?;
    Ok(report)
}

/// Ingests annotated frames (every directory under `src` is treated as one
/// clip), splits them with per-class stratification and writes the dataset.
pub fn build_dataset(opts: &BuildOptions) -> Result<BuildReport, BuildError> {
    if let Some(plan) = &opts.augment {
        plan.spec.validate()?;
    }
    let nc = opts.names.len();
    let mut dirs = BTreeSet::new();
    for entry in WalkDir::new(&opts.src) {
        let entry = entry.map_err(|e| BuildError::Io {
            path: opts.src.clone(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() && is_image_path(entry.path()) {
            if let Some(parent) = entry.path().parent() {
                dirs.insert(parent.to_path_buf());
            }
        }
    }
    if dirs.is_empty() {
        return Err(BuildError::NoImages(opts.src.clone()));
    }
    let mut frames = Vec::new();
    for dir in &dirs {
        frames.extend(ingest_frames(dir, opts.stride)?);
    }
    let labeled: Vec<(PathBuf, Vec<LabelEntry>)> = frames
        .into_par_iter()
        .map(|p| read_labels(&p, nc).map(|l| (p, l.unwrap_or_default())))
        .collect::<Result<_, _>>()?;

    let parts = split_dataset(
        labeled,
        opts.ratios,
        opts.seed,
        Some(|(_, l): &(PathBuf, Vec<LabelEntry>)| l.first().map(|e| e.class_id)),
    )?;
    let mut items = Vec::new();
    for (split, list) in [(Split::Train, parts.train), (Split::Val, parts.val), (Split::Test, parts.test)] {
        for (source, labels) in list {
            items.push(Item {
                split,
                name: output_name(&opts.src, &source),
                source,
                labels,
            });
        }
    }
    items.sort_by(|a, b| (a.split, &a.name).cmp(&(b.split, &b.name)));

    let dropped = write_items(&items, &opts.out, opts.resize, opts.augment.as_ref(), opts.seed)?;
    finish(
        &opts.out,
        &items,
        opts.names.clone(),
        opts.augment.as_ref(),
        dropped,
        Some((opts.seed, opts.ratios)),
    )
}

/// Copies an existing dataset into `out`, adding augmented copies to the
/// planned splits. Split membership is preserved.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    out: &Path,
    plan: &AugmentPlan,
    resize: Option<(u32, u32)>,
) -> Result<BuildReport, BuildError> {
    plan.spec.validate()?;
    let mut items = Vec::new();
    for split in Split::ALL {
        if manifest.split_paths(split).is_empty() {
            continue;
        }
        let bases = manifest.split_paths(split);
        for source in manifest.list_images(split)? {
            let labels = read_labels(&source, manifest.nc)?.unwrap_or_default();
            // Name relative to the split directory holding the image.
            let base = bases
                .iter()
                .find(|b| b.is_dir() && source.starts_with(b))
                .unwrap_or(&manifest.root);
            items.push(Item {
                split,
                name: output_name(base, &source),
                source,
                labels,
            });
        }
    }
    let dropped = write_items(&items, out, resize, Some(plan), plan.spec.seed)?;
    let record = manifest.split_seed.zip(manifest.split_ratios);
    finish(out, &items, manifest.names.clone(), Some(plan), dropped, record)
}
