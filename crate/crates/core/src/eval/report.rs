use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::confusion::ConfusionMatrix;
use super::training_log::TrainingCurve;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub conf_threshold: f64,
    pub iou_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub true_positives: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub images: u64,
    pub predictions: u64,
    pub ground_truths: u64,
    pub per_class_ground_truths: Vec<u64>,
    pub per_class_predictions: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub names: Vec<String>,
    pub iou_thresholds: Vec<f64>,
    /// `None` where a class has neither ground truth nor predictions.
    pub per_class_ap50: Vec<Option<f64>>,
    pub per_class_ap50_95: Vec<Option<f64>>,
    pub map50: f64,
    pub map50_95: f64,
    pub operating_point: OperatingPoint,
    pub confusion: ConfusionMatrix,
    pub counts: EvalCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingCurve>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    std::fs::write(path, bytes).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).map_err(|e| ReportError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    write_file(path, &bytes)
}

fn matrix_rows<T: ToString>(names: &[String], matrix: &[Vec<T>]) -> Vec<Vec<String>> {
    let labels: Vec<String> = names.iter().cloned().chain(["background".to_string()]).collect();
    let mut rows = vec![std::iter::once("predicted\\actual".to_string()).chain(labels.iter().cloned()).collect()];
    for (label, row) in labels.iter().zip(matrix) {
        rows.push(std::iter::once(label.clone()).chain(row.iter().map(T::to_string)).collect());
    }
    rows
}

/// Writes the requested report files into `dir` and returns their paths.
///
/// JSON: `report.json`. CSV: `confusion_matrix.csv`,
/// `confusion_matrix_normalized.csv`, `per_class_ap.csv`, and, when a training
/// curve is attached, `loss_curves.csv` and `map_curves.csv`.
pub fn emit_report(report: &EvalReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Json) {
        let path = dir.join("report.json");
        let mut json = report.to_json();
        json.push('\n');
        write_file(&path, json.as_bytes())?;
        written.push(path);
    }
    if !formats.contains(&ReportFormat::Csv) {
        return Ok(written);
    }

    let path = dir.join("confusion_matrix.csv");
    write_csv(&path, &matrix_rows(&report.names, &report.confusion.counts))?;
    written.push(path);

    let path = dir.join("confusion_matrix_normalized.csv");
    write_csv(&path, &matrix_rows(&report.names, &report.confusion.normalized()))?;
    written.push(path);

    let path = dir.join("per_class_ap.csv");
    let mut rows = vec![["class", "name", "ap50", "ap50_95", "ground_truths"].map(String::from).to_vec()];
    for (c, name) in report.names.iter().enumerate() {
        rows.push(vec![
            c.to_string(),
            name.clone(),
            cell(report.per_class_ap50.get(c).copied().flatten()),
            cell(report.per_class_ap50_95.get(c).copied().flatten()),
            report.counts.per_class_ground_truths.get(c).copied().unwrap_or(0).to_string(),
        ]);
    }
    write_csv(&path, &rows)?;
    written.push(path);

    if let Some(curve) = &report.training {
        let path = dir.join("loss_curves.csv");
        let mut rows = vec![[
            "epoch",
            "train/box_loss",
            "train/cls_loss",
            "train/dfl_loss",
            "val/box_loss",
            "val/cls_loss",
            "val/dfl_loss",
        ]
        .map(String::from)
        .to_vec()];
        for e in &curve.epochs {
            rows.push(vec![
                e.epoch.to_string(),
                cell(e.train_box_loss),
                cell(e.train_cls_loss),
                cell(e.train_dfl_loss),
                cell(e.val_box_loss),
                cell(e.val_cls_loss),
                cell(e.val_dfl_loss),
            ]);
        }
        write_csv(&path, &rows)?;
        written.push(path);

        let path = dir.join("map_curves.csv");
        let mut rows = vec![["epoch", "precision", "recall", "mAP50", "mAP50-95"].map(String::from).to_vec()];
        for e in &curve.epochs {
            rows.push(vec![
                e.epoch.to_string(),
                cell(e.precision),
                cell(e.recall),
                cell(e.map50),
                cell(e.map50_95),
            ]);
        }
        write_csv(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}
