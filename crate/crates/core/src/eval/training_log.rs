use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TrainingLogError {
    #[error("malformed training log: {0}")]
    MalformedCsv(String),
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NonNumericCell { row: usize, column: String, value: String },
}

/// One epoch of a training run. Columns absent from the log stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_box_loss: Option<f64>,
    pub train_cls_loss: Option<f64>,
    pub train_dfl_loss: Option<f64>,
    pub val_box_loss: Option<f64>,
    pub val_cls_loss: Option<f64>,
    pub val_dfl_loss: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub map50: Option<f64>,
    pub map50_95: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingCurve {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

type Setter = fn(&mut EpochRecord, f64);

// Accepted header spellings, compared after trimming.
const COLUMNS: &[(&[&str], Setter)] = &[
    (&["train/box_loss"], |r, v| r.train_box_loss = Some(v)),
    (&["train/cls_loss"], |r, v| r.train_cls_loss = Some(v)),
    (&["train/dfl_loss"], |r, v| r.train_dfl_loss = Some(v)),
    (&["val/box_loss"], |r, v| r.val_box_loss = Some(v)),
    (&["val/cls_loss"], |r, v| r.val_cls_loss = Some(v)),
    (&["val/dfl_loss"], |r, v| r.val_dfl_loss = Some(v)),
    (&["metrics/precision(B)", "metrics/precision"], |r, v| r.precision = Some(v)),
    (&["metrics/recall(B)", "metrics/recall"], |r, v| r.recall = Some(v)),
    (&["metrics/mAP50(B)", "metrics/mAP50", "metrics/mAP_0.5"], |r, v| r.map50 = Some(v)),
    (&["metrics/mAP50-95(B)", "metrics/mAP50-95", "metrics/mAP_0.5:0.95"], |r, v| {
        r.map50_95 = Some(v)
    }),
];

/// Parses a per-epoch results CSV by header name.
///
/// Rows are numbered from 1 after the header. Without an `epoch` column the
/// row number is used. Empty cells are treated as absent.
pub fn parse_training_log(text: &str) -> Result<TrainingCurve, TrainingLogError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| TrainingLogError::MalformedCsv(e.to_string()))?
        .clone();
    if headers.iter().all(str::is_empty) {
        return Err(TrainingLogError::MalformedCsv("missing header row".into()));
    }
    let epoch_col = headers.iter().position(|h| h == "epoch");
    let setters: Vec<(usize, Setter)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| COLUMNS.iter().find(|(names, _)| names.contains(&h)).map(|(_, s)| (i, *s)))
        .collect();

    let mut epochs: Vec<EpochRecord> = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row_no = n + 1;
        let row = row.map_err(|e| TrainingLogError::MalformedCsv(format!("row {row_no}: {e}")))?;
        if row.iter().all(str::is_empty) {
            continue;
        }
        let cell = |col: usize| -> Result<Option<f64>, TrainingLogError> {
            match row.get(col).unwrap_or("") {
                "" => Ok(None),
                v => v.parse::<f64>().map(Some).map_err(|_| TrainingLogError::NonNumericCell {
                    row: row_no,
                    column: headers[col].to_string(),
                    value: v.to_string(),
                }),
            }
        };
        let epoch = match epoch_col {
            Some(col) => match cell(col)? {
                Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => v as u32,
                _ => {
                    return Err(TrainingLogError::NonNumericCell {
                        row: row_no,
                        column: "epoch".into(),
                        value: row.get(col).unwrap_or("").to_string(),
                    })
                }
            },
            None => row_no as u32,
        };
        if epochs.last().is_some_and(|prev| prev.epoch >= epoch) {
            return Err(TrainingLogError::MalformedCsv(format!(
                "row {row_no}: epoch {epoch} does not increase"
            )));
        }
        let mut record = EpochRecord {
            epoch,
            ..Default::default()
        };
        for &(col, set) in &setters {
            if let Some(v) = cell(col)? {
                set(&mut record, v);
            }
        }
        epochs.push(record);
    }
    Ok(TrainingCurve { epochs })
}
