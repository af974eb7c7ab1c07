//! YOLO text label files: one `class cx cy w h` line per object.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::NormBox;

/// A ground-truth object in a label file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelEntry {
    pub class_id: usize,
    pub bbox: NormBox,
}

impl LabelEntry {
    pub fn new(class_id: usize, bbox: NormBox) -> Self {
        Self { class_id, bbox }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("line {line}: malformed label line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: class id {class_id} out of range (nc = {nc})")]
    ClassOutOfRange {
        line: usize,
        class_id: usize,
        nc: usize,
    },
    #[error("line {line}: coordinate {value} outside [0, 1]")]
    CoordOutOfRange { line: usize, value: f64 },
}

impl LabelError {
    pub fn line(&self) -> usize {
        match self {
            Self::MalformedLine { line, .. }
            | Self::ClassOutOfRange { line, .. }
            | Self::CoordOutOfRange { line, .. } => *line,
        }
    }
}

pub fn parse_label_file(text: &str, nc: usize) -> Result<Vec<LabelEntry>, LabelError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(LabelError::MalformedLine {
                line,
                reason: format!("expected 5 fields, found {}", tokens.len()),
            });
        }
        let class_id: usize = tokens[0].parse().map_err(|_| LabelError::MalformedLine {
            line,
            reason: format!("class id {:?} is not a non-negative integer", tokens[0]),
        })?;
        let mut coords = [0.0f64; 4];
        for (slot, tok) in coords.iter_mut().zip(&tokens[1..]) {
            let value: f64 = tok.parse().map_err(|_| LabelError::MalformedLine {
                line,
                reason: format!("{tok:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(LabelError::MalformedLine {
                    line,
                    reason: format!("{tok:?} is not finite"),
                });
            }
            *slot = value;
        }
        if class_id >= nc {
            return Err(LabelError::ClassOutOfRange { line, class_id, nc });
        }
        if let Some(&value) = coords.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(LabelError::CoordOutOfRange { line, value });
        }
        entries.push(LabelEntry::new(
            class_id,
            NormBox::new(coords[0], coords[1], coords[2], coords[3]),
        ));
    }
    Ok(entries)
}

pub fn write_label_file(entries: &[LabelEntry]) -> String {
    let mut out = String::with_capacity(entries.len() * 40);
    for e in entries {
        let b = &e.bbox;
        writeln!(
            out,
            "{} {:.6} {:.6} {:.6} {:.6}",
            e.class_id, b.cx, b.cy, b.w, b.h
        )
        .expect("writing to a String cannot fail");
    }
    out
}
