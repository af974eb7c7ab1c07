//! Detection scoring: matching, AP/mAP, confusion matrices, training logs
//! and report files.

pub mod ap;
pub mod confusion;
pub mod map;
pub mod matching;
pub mod records;
pub mod report;
pub mod training_log;

use std::path::PathBuf;

use thiserror::Error;

pub use ap::average_precision;
pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use map::{coco_thresholds, map_at, MapResult};
pub use matching::{match_detections, GroundTruth, MatchResult};
pub use records::{align_predictions, load_ground_truth, parse_prediction_lines, EvalImage};
pub use report::{emit_report, EvalCounts, EvalReport, OperatingPoint, ReportError, ReportFormat, REPORT_SCHEMA_VERSION};
pub use training_log::{parse_training_log, EpochRecord, TrainingCurve, TrainingLogError};

use crate::dataset::manifest::ManifestError;
use crate::dataset::stats::StatsError;
use crate::decode::Detection;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("prediction for unknown image: {0}")]
    UnknownImage(String),
    #[error("class {class_id} is outside 0..{nc}")]
    ClassOutOfRange { class_id: usize, nc: usize },
    #[error("{} prediction lists for {} images", .preds, .images)]
    LengthMismatch { preds: usize, images: usize },
    #[error("cannot read image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Labels(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Minimum score for the confusion matrix and the operating point.
    pub conf_threshold: f64,
    /// Pairing IoU for the confusion matrix.
    pub matrix_iou: f64,
    /// Matching IoU for precision and recall at the operating point.
    pub operating_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.25,
            matrix_iou: 0.45,
            operating_iou: 0.5,
        }
    }
}

fn sorted_by_score(preds: &[Detection]) -> Vec<Detection> {
    let mut v = preds.to_vec();
    v.sort_by(|a, b| b.score.total_cmp(&a.score));
    v
}

/// Full evaluation of per-image predictions against ground truth.
///
/// mAP uses every prediction; the confusion matrix and the precision/recall
/// operating point only those scoring at least `conf_threshold`.
pub fn evaluate(
    preds_by_image: &[Vec<Detection>],
    gts_by_image: &[Vec<GroundTruth>],
    names: &[String],
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let nc = names.len();
    if preds_by_image.len() != gts_by_image.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds_by_image.len(),
            images: gts_by_image.len(),
        });
    }
    let out_of_range = preds_by_image
        .iter()
        .flatten()
        .map(|d| d.class_id)
        .chain(gts_by_image.iter().flatten().map(|g| g.class_id))
        .find(|&c| c >= nc);
    if let Some(class_id) = out_of_range {
        return Err(EvalError::ClassOutOfRange { class_id, nc });
    }

    let thresholds = coco_thresholds();
    let maps = map_at(preds_by_image, gts_by_image, nc, &thresholds);

    let mut tp = 0u64;
    let mut kept = 0u64;
    for (preds, gts) in preds_by_image.iter().zip(gts_by_image) {
        let confident: Vec<Detection> = sorted_by_score(preds)
            .into_iter()
            .filter(|d| d.score >= config.conf_threshold)
            .collect();
        kept += confident.len() as u64;
        tp += match_detections(&confident, gts, config.operating_iou).true_positives() as u64;
    }
    let n_gt = gts_by_image.iter().map(Vec::len).sum::<usize>() as u64;
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };

    let mut counts = EvalCounts {
        images: preds_by_image.len() as u64,
        predictions: preds_by_image.iter().map(Vec::len).sum::<usize>() as u64,
        ground_truths: n_gt,
        per_class_ground_truths: vec![0; nc],
        per_class_predictions: vec![0; nc],
    };
    for g in gts_by_image.iter().flatten() {
        counts.per_class_ground_truths[g.class_id] += 1;
    }
    for d in preds_by_image.iter().flatten() {
        counts.per_class_predictions[d.class_id] += 1;
    }

    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        names: names.to_vec(),
        per_class_ap50: maps.ap[0].clone(),
        per_class_ap50_95: maps.class_mean_ap(),
        map50: maps.map[0],
        map50_95: maps.mean_map(),
        iou_thresholds: thresholds,
        operating_point: OperatingPoint {
            conf_threshold: config.conf_threshold,
            iou_threshold: config.operating_iou,
            precision: ratio(tp, kept),
            recall: ratio(tp, n_gt),
            true_positives: tp,
        },
        confusion: confusion_matrix(preds_by_image, gts_by_image, nc, config.conf_threshold, config.matrix_iou),
        counts,
        training: None,
    })
}
