//! Anchor-free head decoding: grid generation, distance-distribution
//! expectation, per-class sigmoid scoring and non-maximum suppression.

pub mod grid;
pub mod head;
pub mod nms;
pub mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{grid_levels, make_grid, AnchorPoint, GridLevel, DEFAULT_STRIDES};
pub use head::{
    decode_pretransformed, decode_raw, dfl_expectation, sigmoid, Detection, HeadLevel, HeadOutput,
    PretransformedOutput, RawHeadOutput, DEFAULT_REG_MAX,
};
pub use nms::nms;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("input {width}x{height} is not divisible by stride {stride}")]
    NotDivisible { width: u32, height: u32, stride: u32 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub conf_threshold: f64,
    pub nms_iou_threshold: f64,
    pub max_detections: usize,
    pub class_aware: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.25,
            nms_iou_threshold: 0.45,
            max_detections: 300,
            class_aware: true,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("conf", self.conf_threshold), ("iou", self.nms_iou_threshold)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("{name} threshold {v} must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Decodes either output mode and applies NMS.
pub fn decode_and_suppress(
    output: &HeadOutput,
    grid: &[AnchorPoint],
    config: &DecodeConfig,
) -> Result<Vec<Detection>, DecodeError> {
    let candidates = match output {
        HeadOutput::Raw(raw) => decode_raw(raw, grid, config.conf_threshold)?,
        HeadOutput::Pretransformed(t) => decode_pretransformed(t, config.conf_threshold)?,
    };
    Ok(nms(
        &candidates,
        config.nms_iou_threshold,
        config.class_aware,
        config.max_detections,
    ))
}
