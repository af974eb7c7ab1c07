//! Static sign-language detection toolkit.
//!
//! * [`geometry`] box types, letterbox geometry, IoU and CIoU.
//! * [`dataset`] YOLO labels and manifests, frame ingestion, augmentation, splits, statistics.
//! * [`decode`] anchor-free head decoding and NMS.
//! * [`pipeline`] frame preprocessing, model backends, caption assembly, streaming.
//! * [`eval`] matching, AP/mAP, confusion matrices, training logs and reports.

pub mod dataset;
pub mod decode;
pub mod eval;
pub mod geometry;
pub mod pipeline;
